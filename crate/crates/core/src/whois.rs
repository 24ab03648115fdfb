//! Minimal WHOIS client: send `<domain>\r\n` over TCP port 43, read the free
//! text response until the server closes, and pull out the four registration
//! fields downstream features need. The transport is injectable so tests and
//! CI replay recorded responses instead of touching the network.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{parse_iso_date, DomainName, WhoisRecord};

#[derive(Debug, Error)]
pub enum WhoisError {
    #[error("could not resolve {server}: {reason}")]
    Resolve { server: String, reason: String },
    #[error("connect to {server} timed out")]
    ConnectTimeout { server: String },
    #[error("read from {server} timed out")]
    ReadTimeout { server: String },
    #[error("server {server} refused connection: {reason}")]
    Refused { server: String, reason: String },
    #[error("no fixture for {domain} under {dir}")]
    FixtureMissing { domain: String, dir: String },
    #[error("i/o error talking to {server}: {reason}")]
    Io { server: String, reason: String },
}

/// Byte-level fetch abstraction: live TCP or recorded fixtures.
pub trait WhoisTransport: Send + Sync {
    fn fetch_raw(
        &self,
        server: &str,
        domain: &str,
        timeout: Duration,
    ) -> Result<Vec<u8>, WhoisError>;
}

/// Plain TCP transport speaking the port-43 protocol. Responses are capped
/// to bound memory against misbehaving servers.
pub struct TcpTransport {
    pub max_response_bytes: usize,
}

impl Default for TcpTransport {
    fn default() -> Self {
        TcpTransport {
            max_response_bytes: 1 << 20,
        }
    }
}

impl WhoisTransport for TcpTransport {
    fn fetch_raw(
        &self,
        server: &str,
        domain: &str,
        timeout: Duration,
    ) -> Result<Vec<u8>, WhoisError> {
        let addr = (server, 43)
            .to_socket_addrs()
            .map_err(|e| WhoisError::Resolve {
                server: server.to_string(),
                reason: e.to_string(),
            })?
            .next()
            .ok_or_else(|| WhoisError::Resolve {
                server: server.to_string(),
                reason: "no addresses".to_string(),
            })?;
        let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| match e.kind() {
            std::io::ErrorKind::TimedOut => WhoisError::ConnectTimeout {
                server: server.to_string(),
            },
            std::io::ErrorKind::ConnectionRefused => WhoisError::Refused {
                server: server.to_string(),
                reason: e.to_string(),
            },
            _ => WhoisError::Io {
                server: server.to_string(),
                reason: e.to_string(),
            },
        })?;
        let io_fail = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => {
                WhoisError::ReadTimeout {
                    server: server.to_string(),
                }
            }
            _ => WhoisError::Io {
                server: server.to_string(),
                reason: e.to_string(),
            },
        };
        stream.set_read_timeout(Some(timeout)).map_err(io_fail)?;
        stream.set_write_timeout(Some(timeout)).map_err(io_fail)?;
        let mut stream = stream;
        stream
            .write_all(format!("{domain}\r\n").as_bytes())
            .map_err(io_fail)?;

        let mut body = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match stream.read(&mut chunk) {
                Ok(0) => break,
                Ok(n) => {
                    let room = self.max_response_bytes.saturating_sub(body.len());
                    body.extend_from_slice(&chunk[..n.min(room)]);
                    if body.len() >= self.max_response_bytes {
                        break;
                    }
                }
                Err(e) => return Err(io_fail(e)),
            }
        }
        Ok(body)
    }
}

/// One recorded fetch, for asserting batch scheduling behavior.
#[derive(Debug, Clone)]
pub struct FetchEvent {
    pub server: String,
    pub domain: String,
    pub at: Instant,
}

/// Replays responses from a directory of `<canonical domain>.txt` files and
/// logs every fetch.
pub struct FixtureTransport {
    dir: PathBuf,
    log: Mutex<Vec<FetchEvent>>,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport {
            dir: dir.into(),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn fetch_log(&self) -> Vec<FetchEvent> {
        self.log.lock().unwrap().clone()
    }
}

impl WhoisTransport for FixtureTransport {
    fn fetch_raw(
        &self,
        server: &str,
        domain: &str,
        _timeout: Duration,
    ) -> Result<Vec<u8>, WhoisError> {
        self.log.lock().unwrap().push(FetchEvent {
            server: server.to_string(),
            domain: domain.to_string(),
            at: Instant::now(),
        });
        let path = self.dir.join(format!("{domain}.txt"));
        std::fs::read(&path).map_err(|_| WhoisError::FixtureMissing {
            domain: domain.to_string(),
            dir: self.dir.display().to_string(),
        })
    }
}

const CREATION_KEYS: [&str; 3] = ["creation date", "created", "registered on"];
const EXPIRATION_KEYS: [&str; 3] = ["registry expiry date", "expiration date", "expires"];
const UPDATED_KEYS: [&str; 2] = ["updated date", "last updated"];

/// Extract the four registration fields from free WHOIS text. Keys match
/// case-insensitively on the text before the first colon; within each key
/// family the first line whose value actually parses wins. Never fails:
/// unrecognizable text just leaves fields absent.
pub fn parse_whois_text(raw: &str) -> WhoisRecord {
    let mut record = WhoisRecord::default();
    for line in raw.lines() {
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim().to_lowercase();
        let value = value.trim();
        if value.is_empty() {
            continue;
        }
        if record.creation_date.is_none() && CREATION_KEYS.contains(&key.as_str()) {
            record.creation_date = parse_iso_date(value);
        } else if record.expiration_date.is_none() && EXPIRATION_KEYS.contains(&key.as_str()) {
            record.expiration_date = parse_iso_date(value);
        } else if record.updated_date.is_none() && UPDATED_KEYS.contains(&key.as_str()) {
            record.updated_date = parse_iso_date(value);
        } else if record.registrar_name.is_none() && key == "registrar" {
            record.registrar_name = Some(value.to_string());
        }
    }
    record
}

/// A fetched response with its parse.
#[derive(Debug, Clone)]
pub struct WhoisResponse {
    pub domain: DomainName,
    pub server: String,
    pub raw_text: String,
    pub parsed: WhoisRecord,
}

/// Fetch and parse one domain's WHOIS text.
pub fn fetch_whois(
    transport: &dyn WhoisTransport,
    domain: &DomainName,
    server: &str,
    timeout: Duration,
) -> Result<WhoisResponse, WhoisError> {
    let bytes = transport.fetch_raw(server, domain.canonical(), timeout)?;
    let raw_text = String::from_utf8_lossy(&bytes).into_owned();
    let parsed = parse_whois_text(&raw_text);
    Ok(WhoisResponse {
        domain: domain.clone(),
        server: server.to_string(),
        raw_text,
        parsed,
    })
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub server: String,
    pub timeout: Duration,
    /// Worker count; fetches to the same server are additionally spaced by
    /// `politeness`.
    pub concurrency: usize,
    pub politeness: Duration,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            server: "whois.verisign-grs.com".to_string(),
            timeout: Duration::from_secs(10),
            concurrency: 4,
            politeness: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Default)]
pub struct BatchOutcome {
    /// One row per input domain, in input order. Failed fetches yield an
    /// empty record so downstream output still covers every domain.
    pub rows: Vec<(String, WhoisRecord)>,
    pub errors: Vec<(String, String)>,
}

fn wait_turn(gate: &Mutex<HashMap<String, Instant>>, server: &str, politeness: Duration) {
    if politeness.is_zero() {
        return;
    }
    loop {
        let now = Instant::now();
        let mut slots = gate.lock().unwrap();
        match slots.get(server) {
            Some(next) if *next > now => {
                let wait = *next - now;
                drop(slots);
                std::thread::sleep(wait);
            }
            _ => {
                slots.insert(server.to_string(), now + politeness);
                return;
            }
        }
    }
}

/// Fetch WHOIS data for many domains with a bounded worker pool. Errors are
/// collected per domain, never fatal for the batch.
pub fn fetch_batch(
    transport: &dyn WhoisTransport,
    domains: &[DomainName],
    cfg: &BatchConfig,
) -> BatchOutcome {
    let next = AtomicUsize::new(0);
    let gate: Mutex<HashMap<String, Instant>> = Mutex::new(HashMap::new());
    let results: Vec<Mutex<Option<Result<WhoisRecord, WhoisError>>>> =
        domains.iter().map(|_| Mutex::new(None)).collect();

    let workers = cfg.concurrency.max(1).min(domains.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= domains.len() {
                    return;
                }
                wait_turn(&gate, &cfg.server, cfg.politeness);
                let result = fetch_whois(transport, &domains[i], &cfg.server, cfg.timeout)
                    .map(|r| r.parsed);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut outcome = BatchOutcome::default();
    for (domain, slot) in domains.iter().zip(results) {
        let canonical = domain.canonical().to_string();
        match slot.into_inner().unwrap().expect("worker filled every slot") {
            Ok(record) => outcome.rows.push((canonical, record)),
            Err(e) => {
                outcome.errors.push((canonical.clone(), e.to_string()));
                outcome.rows.push((canonical, WhoisRecord::default()));
            }
        }
    }
    outcome
}
