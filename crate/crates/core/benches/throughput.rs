//! Compares the sequential and data-parallel paths of the two hot loops:
//! exhaustive file indexing over a local mirror, and per-corpus archive
//! screening.
//!
//! Run with `cargo bench` (parallel feature on by default) or
//! `cargo bench --no-default-features` for the sequential-only build.

#[path = "../tests/common/mod.rs"]
mod common;

use std::fs;
use std::sync::Mutex;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use corpus_harvest::criteria::{parse_expr, CHILD_SES_SCREEN};
use corpus_harvest::harvester::{screen_dataset, RetryPolicy};
use corpus_harvest::indexer::index_files;
use corpus_harvest::remote_source::CorpusSource;

const FILES_PER_CORPUS: usize = 40;
const CORPORA: usize = 8;

fn build_mirror(root: &std::path::Path) {
    for c in 0..CORPORA {
        let corpus = format!("Corpus{c}");
        let dir = root.join("childes/Eng-NA").join(&corpus);
        fs::create_dir_all(&dir).unwrap();
        for f in 0..FILES_PER_CORPUS {
            let name = format!("child{f}");
            // Half the files carry SES info and will match.
            let text = if f % 2 == 0 {
                common::matching_cha(&corpus, &name, "MC")
            } else {
                common::plain_cha(&corpus, &name)
            };
            fs::write(dir.join(format!("{name}.cha")), text).unwrap();
        }
    }
}

fn bench_index(c: &mut Criterion) {
    let mirror = tempfile::tempdir().unwrap();
    build_mirror(mirror.path());
    let criteria = parse_expr(CHILD_SES_SCREEN).unwrap();

    let mut group = c.benchmark_group("index_files");
    for parallelism in [1usize, 4, 8] {
        group.bench_with_input(
            BenchmarkId::from_parameter(parallelism),
            &parallelism,
            |b, &p| {
                b.iter(|| index_files(mirror.path(), &criteria, "CHI", p).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_screen(c: &mut Criterion) {
    let server = common::StubServer::start();
    let mut sources = Vec::new();
    for n in 0..CORPORA {
        let corpus = format!("Corpus{n}");
        // Match only in the last entry so screening walks the archive.
        let entries: Vec<(String, String)> = (0..FILES_PER_CORPUS)
            .map(|f| {
                let name = format!("child{f}");
                let text = if f == FILES_PER_CORPUS - 1 {
                    common::matching_cha(&corpus, &name, "MC")
                } else {
                    common::plain_cha(&corpus, &name)
                };
                (format!("{name}.cha"), text)
            })
            .collect();
        let entry_refs: Vec<(&str, &str)> = entries
            .iter()
            .map(|(n, t)| (n.as_str(), t.as_str()))
            .collect();
        let path = format!("/childes/data/Eng-NA/{corpus}.zip");
        server.route(&path, common::Route::Bytes(common::make_zip(&entry_refs)));
        sources.push(CorpusSource {
            collection: "childes".into(),
            dataset: "Eng-NA".into(),
            corpus: corpus.clone(),
            archive_url: server.url(&path),
        });
    }
    let fetcher = corpus_harvest::fetch::HttpFetcher::default();
    let criteria = parse_expr(CHILD_SES_SCREEN).unwrap();
    let retry = RetryPolicy {
        attempts: 1,
        initial_backoff: std::time::Duration::from_millis(0),
    };
    let lock = Mutex::new(());

    let mut group = c.benchmark_group("screen_dataset");
    group.sample_size(20);
    for parallelism in [1usize, 4] {
        group.bench_with_input(
            BenchmarkId::from_parameter(parallelism),
            &parallelism,
            |b, &p| {
                b.iter(|| {
                    let _guard = lock.lock().unwrap();
                    screen_dataset(&sources, &criteria, &fetcher, p, &retry).unwrap()
                });
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_index, bench_screen);
criterion_main!(benches);
