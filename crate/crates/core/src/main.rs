//! Command-line front end: the six pipeline steps as composable
//! subcommands sharing one configuration file.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or usage
//! error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Duration;

use clap::{Parser, Subcommand};

use corpus_harvest::config::{ConfigError, PipelineConfig, CONFIG_ENV_VAR};
use corpus_harvest::curator::{self, LabelRuleSet};
use corpus_harvest::fetch::HttpFetcher;
use corpus_harvest::harvester::{self, DatasetScreen, Manifest};
use corpus_harvest::indexer;
use corpus_harvest::remote_source::{self, CorpusSource};

#[derive(Parser)]
#[command(name = "corpus-harvest", version, about = "Harvest and index CHAT transcript corpora")]
struct Cli {
    /// Path to the pipeline configuration file.
    #[arg(long, global = true, env = CONFIG_ENV_VAR)]
    config: Option<PathBuf>,
    /// Override the mirror root directory.
    #[arg(long, global = true)]
    mirror: Option<PathBuf>,
    /// Override the repository base host (e.g. a local fixture server).
    #[arg(long, global = true)]
    base_host: Option<String>,
    /// Override worker parallelism.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Treat per-file parse warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
    /// Perform no writes and no downloads; scan and screen still read.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List downloadable corpus archives for the configured datasets.
    Scan,
    /// Screen corpora against the screening criteria, with early exit.
    Screen,
    /// Download and extract the selected corpora into the mirror.
    Fetch,
    /// Index every mirrored CHAT file against the target criteria.
    Index,
    /// Report the distinct labels of one index column.
    Labels { column: String },
    /// Apply the label rule set and add participant identifiers.
    Normalize,
    /// Run the whole pipeline: scan, screen, fetch, index, normalize.
    Run,
}

enum AppError {
    /// Configuration or usage problem: exit 2.
    Config(String),
    /// Runtime failure: exit 1.
    Runtime(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

macro_rules! runtime {
    ($expr:expr) => {
        $expr.map_err(|e| AppError::Runtime(e.to_string()))
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Runtime(message)) => {
            eprintln!("error\t{message}");
            ExitCode::from(1)
        }
        Err(AppError::Config(message)) => {
            eprintln!("config-error\t{message}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, AppError> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| AppError::Config(format!("no config file given (use --config or ${CONFIG_ENV_VAR})")))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(mirror) = &cli.mirror {
        config.mirror_root = mirror.clone();
        config.resolve_paths()?;
    }
    if let Some(base_host) = &cli.base_host {
        config.base_host = Some(base_host.clone());
    }
    if let Some(parallelism) = cli.parallelism {
        config.parallelism = parallelism;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), AppError> {
    let config = load_config(&cli)?;
    let fetcher = HttpFetcher::new(Duration::from_secs(config.timeout_secs))
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    let ctx = Context {
        config,
        fetcher,
        strict: cli.strict,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Scan => {
            ctx.scan()?;
        }
        Command::Screen => {
            let sources = ctx.scan()?;
            ctx.screen(&sources)?;
        }
        Command::Fetch => {
            let sources = ctx.scan()?;
            let screen = ctx.screen(&sources)?;
            ctx.fetch(&screen)?;
        }
        Command::Index => {
            ctx.index()?;
        }
        Command::Labels { column } => ctx.labels(&column)?,
        Command::Normalize => ctx.normalize()?,
        Command::Run => {
            let sources = ctx.scan()?;
            let screen = ctx.screen(&sources)?;
            ctx.fetch(&screen)?;
            ctx.index()?;
            ctx.normalize()?;
        }
    }
    Ok(())
}

struct Context {
    config: PipelineConfig,
    fetcher: HttpFetcher,
    strict: bool,
    dry_run: bool,
}

impl Context {
    fn scan(&self) -> Result<Vec<CorpusSource>, AppError> {
        let mut sources = Vec::new();
        for dataset in &self.config.datasets {
            // Bad names are a configuration problem, not a runtime one.
            let url = remote_source::dataset_url(
                &self.config.collection,
                dataset,
                self.config.base_host.as_deref(),
            )
            .map_err(|e| AppError::Config(e.to_string()))?;
            println!("scan\tdataset={dataset}\turl={url}");
            let mut found = runtime!(remote_source::scan_zip_urls(
                &self.config.collection,
                dataset,
                &url,
                &self.fetcher,
                self.config.scan_depth,
            ))?;
            sources.append(&mut found);
        }
        sources.sort();
        sources.dedup();
        for source in &sources {
            println!("scan\tcorpus={}\turl={}", source.corpus, source.archive_url);
        }
        println!("scan\ttotal={}", sources.len());
        Ok(sources)
    }

    fn screen(&self, sources: &[CorpusSource]) -> Result<DatasetScreen, AppError> {
        let criteria = self.config.screening_expr()?;
        let screen = runtime!(harvester::screen_dataset(
            sources,
            &criteria,
            &self.fetcher,
            self.config.parallelism,
            &self.config.retry.policy(),
        ))?;
        for result in &screen.results {
            println!(
                "screen\tcorpus={}\tselected={}\tfiles_inspected={}\tfirst_match={}",
                result.source.corpus,
                result.selected,
                result.files_inspected,
                result.first_match.as_deref().unwrap_or("-"),
            );
            for warning in &result.warnings {
                println!("screen\tcorpus={}\twarning={warning}", result.source.corpus);
            }
        }
        for failure in &screen.failures {
            println!(
                "screen\tcorpus={}\tfailed={}",
                failure.source.corpus, failure.error
            );
        }
        if self.strict && !screen.failures.is_empty() {
            return Err(AppError::Runtime(format!(
                "{} corpora failed screening",
                screen.failures.len()
            )));
        }
        println!("screen\tselected={}", screen.selected().count());
        Ok(screen)
    }

    fn fetch(&self, screen: &DatasetScreen) -> Result<(), AppError> {
        if self.dry_run {
            for result in screen.selected() {
                println!("fetch\tcorpus={}\tdry_run=true", result.source.corpus);
            }
            return Ok(());
        }
        runtime!(std::fs::create_dir_all(&self.config.mirror_root))?;
        let manifest_path = self.config.mirror_root.join("manifest.json");
        let manifest = Mutex::new(runtime!(Manifest::load(&manifest_path))?);
        for result in screen.selected() {
            let root = runtime!(harvester::fetch_corpus(
                &result.source,
                &self.config.mirror_root,
                &self.fetcher,
                &manifest,
                &self.config.retry.policy(),
            ))?;
            println!(
                "fetch\tcorpus={}\troot={}",
                result.source.corpus,
                root.display()
            );
        }
        let manifest = manifest.into_inner().expect("manifest lock");
        runtime!(manifest.save(&manifest_path))?;
        println!("fetch\tmanifest={}", manifest_path.display());
        Ok(())
    }

    fn index(&self) -> Result<(), AppError> {
        let criteria = self.config.target_expr()?;
        let table = runtime!(indexer::index_files(
            &self.config.mirror_root,
            &criteria,
            &self.config.focus,
            self.config.parallelism,
        ))?;
        for warning in &table.warnings {
            println!("index\twarning={warning}");
        }
        if self.strict && !table.warnings.is_empty() {
            return Err(AppError::Runtime(format!(
                "{} files produced warnings",
                table.warnings.len()
            )));
        }
        if self.dry_run {
            println!("index\trows={}\tdry_run=true", table.rows.len());
            return Ok(());
        }
        runtime!(indexer::write_index(&table, &self.config.index_csv))?;
        println!(
            "index\trows={}\tcsv={}",
            table.rows.len(),
            self.config.index_csv.display()
        );
        Ok(())
    }

    fn labels(&self, column: &str) -> Result<(), AppError> {
        let table = runtime!(indexer::read_index(&self.config.index_csv))?;
        let report = runtime!(curator::get_labels(&table, column))?;
        for label in &report.labels {
            println!("labels\tcolumn={column}\tlabel={label}");
        }
        println!(
            "labels\tcolumn={column}\tdistinct={}\tmissing={}",
            report.labels.len(),
            report.missing
        );
        Ok(())
    }

    fn normalize(&self) -> Result<(), AppError> {
        let table = runtime!(indexer::read_index(&self.config.index_csv))?;
        let (cleaned, log) = match &self.config.rule_file {
            Some(path) => {
                let rules = runtime!(LabelRuleSet::load(path))?;
                runtime!(curator::apply_rules(&table, &rules))?
            }
            None => (table, Vec::new()),
        };
        let (cleaned, warnings) = if self.config.add_participant_id {
            curator::add_participant_id(&cleaned, &self.config.participant_id_separator)
        } else {
            (cleaned, Vec::new())
        };
        for warning in &warnings {
            println!("normalize\twarning={warning}");
        }
        if self.dry_run {
            println!(
                "normalize\trows={}\tchanges={}\tdry_run=true",
                cleaned.rows.len(),
                log.len()
            );
            return Ok(());
        }
        runtime!(indexer::write_index(&cleaned, &self.config.cleaned_csv))?;
        runtime!(curator::write_change_log(&log, &self.config.change_log_csv))?;
        println!(
            "normalize\trows={}\tchanges={}\tcsv={}",
            cleaned.rows.len(),
            log.len(),
            self.config.cleaned_csv.display()
        );
        Ok(())
    }
}
