//! Shared test support: CHAT fixture builders, in-memory zip archives,
//! and a minimal stub HTTP server the whole pipeline can run against
//! offline.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{Read, Write as IoWrite};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

/// Build a CHAT transcript with the given participants.
///
/// Each participant is (code, name, role, age, sex, group, ses,
/// education); empty strings become empty `@ID` slots.
pub fn make_cha(
    corpus: &str,
    participants: &[(&str, &str, &str, &str, &str, &str, &str, &str)],
    types: &str,
) -> String {
    let mut text = String::from("@UTF8\n@Begin\n@Languages:\teng\n");
    text.push_str("@Participants:\t");
    let decls: Vec<String> = participants
        .iter()
        .map(|(code, name, role, ..)| {
            if name.is_empty() {
                format!("{code} {role}")
            } else {
                format!("{code} {name} {role}")
            }
        })
        .collect();
    text.push_str(&decls.join(", "));
    text.push('\n');
    for (code, _, role, age, sex, group, ses, education) in participants {
        text.push_str(&format!(
            "@ID:\teng|{corpus}|{code}|{age}|{sex}|{group}|{ses}|{role}|{education}||\n"
        ));
    }
    if !types.is_empty() {
        text.push_str(&format!("@Types:\t{types}\n"));
    }
    text.push_str("*CHI:\thi .\n@End\n");
    text
}

/// A child file that satisfies the screening criteria (CHI with SES).
pub fn matching_cha(corpus: &str, name: &str, ses: &str) -> String {
    make_cha(
        corpus,
        &[
            ("CHI", name, "Target_Child", "1;8.", "female", "TD", ses, ""),
            ("MOT", "", "Mother", "", "female", "", "", ""),
        ],
        "cross, toyplay, TD",
    )
}

/// A child file with no SES or education info anywhere.
pub fn plain_cha(corpus: &str, name: &str) -> String {
    make_cha(
        corpus,
        &[
            ("CHI", name, "Target_Child", "2;0.", "male", "", "", ""),
            ("MOT", "", "Mother", "", "female", "", "", ""),
        ],
        "",
    )
}

/// Zip the given (name, content) entries, stored order = archive order.
pub fn make_zip(entries: &[(&str, &str)]) -> Vec<u8> {
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = zip::ZipWriter::new(&mut cursor);
        let options = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated);
        for (name, content) in entries {
            writer.start_file(*name, options).unwrap();
            writer.write_all(content.as_bytes()).unwrap();
        }
        writer.finish().unwrap();
    }
    cursor.into_inner()
}

/// HTML directory listing linking the given entries.
pub fn make_listing(hrefs: &[&str]) -> String {
    let mut html = String::from("<html><body><h1>Index of data</h1><ul>\n");
    for href in hrefs {
        html.push_str(&format!("<li><a href=\"{href}\">{href}</a></li>\n"));
    }
    html.push_str("</ul></body></html>\n");
    html
}

/// Proptest generators shared by the property and acceptance suites.
pub mod gen {
    use proptest::prelude::*;

    use corpus_harvest::chat_header::{parse_header, Field, HeaderMetadata, ParseMode};
    use corpus_harvest::criteria::FilterExpr;

    use super::make_cha;

    pub const CODES: [&str; 5] = ["CHI", "MOT", "FAT", "INV", "SIB"];

    pub fn arb_code() -> impl Strategy<Value = String> {
        prop::sample::select(CODES.as_slice()).prop_map(str::to_string)
    }

    pub fn arb_field() -> impl Strategy<Value = Field> {
        prop::sample::select(Field::ALL.as_slice())
    }

    /// Values that survive quoting: printable, including spaces, quotes
    /// and backslashes to exercise the escaper. Equals trims the expected
    /// value, so keep surrounding whitespace out to preserve round-trips.
    pub fn arb_value() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9_ ,;/\\\\\"'.-]{0,12}".prop_map(|s| s.trim().to_string())
    }

    pub fn arb_leaf() -> impl Strategy<Value = FilterExpr> {
        prop_oneof![
            arb_code().prop_map(FilterExpr::Exists),
            (arb_code(), arb_field()).prop_map(|(c, f)| FilterExpr::NonEmpty(c, f)),
            (arb_code(), arb_field(), arb_value())
                .prop_map(|(c, f, v)| FilterExpr::Equals(c, f, v)),
            (arb_code(), arb_field(), prop::collection::vec(arb_value(), 1..4))
                .prop_map(|(c, f, vs)| FilterExpr::InSet(c, f, vs)),
            (arb_code(), 0.0f64..200.0, prop_oneof![0.0f64..600.0, Just(f64::INFINITY)])
                .prop_map(|(c, lo, hi)| {
                    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                    FilterExpr::AgeInRange(c, lo, hi)
                }),
        ]
    }

    pub fn arb_expr() -> impl Strategy<Value = FilterExpr> {
        arb_leaf().prop_recursive(5, 48, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(FilterExpr::And),
                prop::collection::vec(inner.clone(), 2..4).prop_map(FilterExpr::Or),
                inner.prop_map(|e| FilterExpr::Not(Box::new(e))),
            ]
        })
    }

    /// Structured random headers built through the fixture writer so they
    /// are always syntactically valid CHAT.
    pub fn arb_header() -> impl Strategy<Value = HeaderMetadata> {
        let participant = (
            prop::sample::select(CODES.as_slice()),
            prop::sample::select(["", "Kid", "Target_Child", "Ann"].as_slice()),
            prop::sample::select(["Target_Child", "Mother", "Investigator"].as_slice()),
            prop::sample::select(["", "1;8.", "2;6.15", "0;11.2", "4;0."].as_slice()),
            prop::sample::select(["", "male", "female", "unknown"].as_slice()),
            prop::sample::select(["", "TD", "normal", "MOT_Older_"].as_slice()),
            prop::sample::select(["", "MC", "WC", "UC", "White,UC"].as_slice()),
            prop::sample::select(["", "college", "12"].as_slice()),
        );
        (
            prop::collection::vec(participant, 1..4),
            prop::sample::select(["", "cross, toyplay, TD", "long"].as_slice()),
        )
            .prop_map(|(mut parts, types)| {
                // one declaration per code
                parts.sort_by_key(|p| p.0);
                parts.dedup_by_key(|p| p.0);
                let rows: Vec<_> = parts
                    .iter()
                    .map(|p| (p.0, p.1, p.2, p.3, p.4, p.5, p.6, p.7))
                    .collect();
                let text = make_cha("Prop", &rows, types);
                parse_header(&text, ParseMode::Lenient).expect("generated header parses")
            })
    }
}

#[derive(Clone)]
pub enum Route {
    Html(String),
    Bytes(Vec<u8>),
    Status(u16),
    /// Responds 503 the first `fails` times, then serves the bytes.
    Flaky { fails: u32, body: Vec<u8> },
}

struct FlakyState {
    seen: AtomicU32,
}

/// Minimal single-purpose HTTP/1.1 server for tests. Routes are exact
/// request paths.
pub struct StubServer {
    addr: String,
    routes: Arc<Mutex<HashMap<String, Route>>>,
    flaky: Arc<Mutex<HashMap<String, Arc<FlakyState>>>>,
    hits: Arc<Mutex<Vec<String>>>,
    shutdown: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl StubServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = format!("127.0.0.1:{}", listener.local_addr().unwrap().port());
        let routes: Arc<Mutex<HashMap<String, Route>>> = Arc::new(Mutex::new(HashMap::new()));
        let flaky: Arc<Mutex<HashMap<String, Arc<FlakyState>>>> =
            Arc::new(Mutex::new(HashMap::new()));
        let hits: Arc<Mutex<Vec<String>>> = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));

        let handle = {
            let routes = Arc::clone(&routes);
            let flaky = Arc::clone(&flaky);
            let hits = Arc::clone(&hits);
            let shutdown = Arc::clone(&shutdown);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let routes = Arc::clone(&routes);
                    let flaky = Arc::clone(&flaky);
                    let hits = Arc::clone(&hits);
                    thread::spawn(move || {
                        let _ = serve_one(stream, &routes, &flaky, &hits);
                    });
                }
            })
        };

        StubServer {
            addr,
            routes,
            flaky,
            hits,
            shutdown,
            handle: Some(handle),
        }
    }

    /// Host:port suitable for a base-host override.
    pub fn base_host(&self) -> String {
        self.addr.clone()
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn route(&self, path: &str, route: Route) {
        if let Route::Flaky { .. } = route {
            self.flaky.lock().unwrap().insert(
                path.to_string(),
                Arc::new(FlakyState {
                    seen: AtomicU32::new(0),
                }),
            );
        }
        self.routes.lock().unwrap().insert(path.to_string(), route);
    }

    pub fn hits(&self) -> Vec<String> {
        self.hits.lock().unwrap().clone()
    }

    /// Serve a whole dataset: a listing at
    /// `/<collection>/data/<dataset>` plus one zip route per corpus.
    pub fn mount_dataset(&self, collection: &str, dataset: &str, corpora: &[(&str, Vec<u8>)]) {
        let hrefs: Vec<String> = corpora.iter().map(|(name, _)| format!("{name}.zip")).collect();
        let href_refs: Vec<&str> = hrefs.iter().map(String::as_str).collect();
        let listing_path = format!("/{collection}/data/{dataset}");
        let listing = make_listing(&href_refs);
        self.route(&listing_path, Route::Html(listing.clone()));
        self.route(&format!("{listing_path}/"), Route::Html(listing));
        for (name, bytes) in corpora {
            self.route(
                &format!("{listing_path}/{name}.zip"),
                Route::Bytes(bytes.clone()),
            );
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(&self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(
    mut stream: TcpStream,
    routes: &Mutex<HashMap<String, Route>>,
    flaky: &Mutex<HashMap<String, Arc<FlakyState>>>,
    hits: &Mutex<Vec<String>>,
) -> std::io::Result<()> {
    let mut buf = [0u8; 8192];
    let n = stream.read(&mut buf)?;
    let request = String::from_utf8_lossy(&buf[..n]);
    let path = request
        .lines()
        .next()
        .and_then(|line| line.split_whitespace().nth(1))
        .unwrap_or("/")
        .to_string();
    hits.lock().unwrap().push(path.clone());

    let route = routes.lock().unwrap().get(&path).cloned();
    match route {
        Some(Route::Html(body)) => respond(&mut stream, 200, "text/html", body.as_bytes()),
        Some(Route::Bytes(body)) => respond(&mut stream, 200, "application/zip", &body),
        Some(Route::Status(code)) => respond(&mut stream, code, "text/plain", b""),
        Some(Route::Flaky { fails, body }) => {
            let state = Arc::clone(flaky.lock().unwrap().get(&path).expect("flaky state"));
            let seen = state.seen.fetch_add(1, Ordering::SeqCst);
            if seen < fails {
                respond(&mut stream, 503, "text/plain", b"try again")
            } else {
                respond(&mut stream, 200, "application/zip", &body)
            }
        }
        None => respond(&mut stream, 404, "text/plain", b"not found"),
    }
}

fn respond(stream: &mut TcpStream, status: u16, content_type: &str, body: &[u8]) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        401 => "Unauthorized",
        404 => "Not Found",
        503 => "Service Unavailable",
        _ => "Status",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}
