//! Seeded synthetic dataset generator. Class signal is deliberately spread
//! across the registration-lifetime slots (young, short-lived registrations
//! at low-reputation registrars for the malicious class) and naming style
//! (theme-word compounds with digits and rare TLDs versus short dictionary
//! names on mainstream TLDs), so both feature families separate the classes.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{write_enrichment, IngestError};
use crate::model::{normalize_domain, Label, WebsiteRecord, WhoisRecord};

const THEME_WORDS: [&str; 16] = [
    "covid", "corona", "virus", "vaccine", "mask", "pandemic", "quarantine", "testkit", "relief",
    "cure", "outbreak", "sanitizer", "remedy", "immunity", "alert", "tracker",
];

const HOOK_WORDS: [&str; 14] = [
    "help", "fund", "store", "shop", "free", "now", "online", "support", "info", "care", "secure",
    "official", "portal", "aid",
];

const MALICIOUS_PREFIXES: [&str; 4] = ["secure", "login", "get", "my"];

const BENIGN_WORDS: [&str; 48] = [
    "maple", "river", "garden", "bakery", "studio", "coffee", "bridge", "harbor", "meadow",
    "willow", "summit", "prairie", "lantern", "compass", "orchard", "cedar", "violet", "harvest",
    "anchor", "beacon", "canyon", "drift", "ember", "fable", "grove", "haven", "inlet", "juniper",
    "kindred", "larkspur", "mellow", "noble", "oakley", "pebble", "quill", "raven", "sable",
    "timber", "umber", "vantage", "walnut", "yonder", "zephyr", "aspen", "birch", "clover",
    "dahlia", "elm",
];

const BENIGN_SECOND: [&str; 24] = [
    "books", "labs", "works", "press", "farm", "gallery", "market", "travel", "design", "media",
    "crafts", "goods", "house", "supply", "trade", "kitchen", "garage", "clinic", "school",
    "theater", "museum", "journal", "bistro", "foundry",
];

const MALICIOUS_TLDS: [&str; 6] = ["xyz", "top", "site", "online", "club", "buzz"];
const BENIGN_TLDS: [&str; 5] = ["com", "org", "net", "io", "co"];

const CHEAP_REGISTRARS: [&str; 5] = [
    "Quickhost Registrations",
    "Bargain Domains LLC",
    "Instant Names Inc",
    "Nimbus Registry Services",
    "Zerocost Registrar",
];

const MAINSTREAM_REGISTRARS: [&str; 6] = [
    "Summit Domains",
    "Harbor Registrar Group",
    "Blue Ridge Naming Co",
    "Evergreen Internet Services",
    "Capital Registrars",
    "Beacon Domain Trust",
];

const MALICIOUS_SOURCES: [&str; 3] = ["feed_alpha", "feed_bravo", "feed_charlie"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub records: usize,
    pub malicious_fraction: f64,
    /// Fraction of records emitted without any WHOIS data.
    pub whois_missing_fraction: f64,
    /// Fraction of records emitted without a first_seen date.
    pub undated_fraction: f64,
    pub seed: u64,
    pub reference_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            records: 5_000,
            malicious_fraction: 0.75,
            whois_missing_fraction: 0.0,
            undated_fraction: 0.05,
            seed: 0,
            reference_date: NaiveDate::from_ymd_opt(2020, 7, 1).expect("valid date"),
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn malicious_name(rng: &mut ChaCha8Rng) -> String {
    let theme = pick(rng, &THEME_WORDS);
    let hook = pick(rng, &HOOK_WORDS);
    let mut sld = match rng.random_range(0..5) {
        0 => format!("{theme}{hook}"),
        1 => format!("{theme}-{hook}"),
        2 => format!("{theme}{hook}{}", rng.random_range(10..10_000)),
        3 => format!("{theme}-{hook}-{}", rng.random_range(10..1_000)),
        _ => format!("{hook}{theme}"),
    };
    if rng.random_bool(0.25) {
        sld = format!("{}.{sld}", pick(rng, &MALICIOUS_PREFIXES));
    }
    format!("{sld}.{}", pick(rng, &MALICIOUS_TLDS))
}

fn benign_name(rng: &mut ChaCha8Rng) -> String {
    let word = pick(rng, &BENIGN_WORDS);
    let sld = match rng.random_range(0..6) {
        0 => word.to_string(),
        _ => format!("{word}{}", pick(rng, &BENIGN_SECOND)),
    };
    format!("{sld}.{}", pick(rng, &BENIGN_TLDS))
}

fn unique_name(rng: &mut ChaCha8Rng, label: Label, used: &mut HashSet<String>) -> String {
    for attempt in 0u32.. {
        let mut name = match label {
            Label::Malicious => malicious_name(rng),
            Label::Benign => benign_name(rng),
        };
        // pools are finite; salt the stragglers rather than spin forever
        if attempt > 50 {
            let (head, rest) = name.split_once('.').expect("names contain a dot");
            name = format!("{head}{}.{rest}", rng.random_range(10..100_000));
        }
        if used.insert(name.clone()) {
            return name;
        }
    }
    unreachable!()
}

fn synth_whois(rng: &mut ChaCha8Rng, label: Label, reference: NaiveDate) -> WhoisRecord {
    let (created_ago, expires_in, registrar) = match label {
        Label::Malicious => (
            rng.random_range(10..=400),
            rng.random_range(-30..=360),
            if rng.random_bool(0.95) {
                pick(rng, &CHEAP_REGISTRARS)
            } else {
                pick(rng, &MAINSTREAM_REGISTRARS)
            },
        ),
        Label::Benign => (
            rng.random_range(380..=7_300),
            rng.random_range(300..=3_600),
            if rng.random_bool(0.97) {
                pick(rng, &MAINSTREAM_REGISTRARS)
            } else {
                pick(rng, &CHEAP_REGISTRARS)
            },
        ),
    };
    // registrations stay ordered: created <= updated <= reference < horizon
    let expires_in = expires_in.max(-created_ago + 30);
    let updated_ago = match label {
        Label::Malicious => created_ago,
        Label::Benign => rng.random_range(30..=1_000).min(created_ago),
    };
    let creation = reference - Days::new(created_ago as u64);
    let updated = reference - Days::new(updated_ago as u64);
    let expiration = if expires_in >= 0 {
        reference + Days::new(expires_in as u64)
    } else {
        reference - Days::new((-expires_in) as u64)
    };
    WhoisRecord {
        registrar_name: Some(registrar.to_string()),
        creation_date: Some(creation),
        expiration_date: Some(expiration),
        updated_date: Some(updated),
    }
}

fn synth_first_seen(rng: &mut ChaCha8Rng, label: Label, reference: NaiveDate) -> NaiveDate {
    let days_back = match label {
        // rough triangular shape peaking mid-window
        Label::Malicious => {
            let a = rng.random_range(0.0..1.0);
            let b = rng.random_range(0.0..1.0);
            1 + ((a + b) / 2.0 * 149.0) as u64
        }
        Label::Benign => rng.random_range(1..=500),
    };
    reference - Days::new(days_back)
}

/// Generate `cfg.records` unique-domain records, malicious first.
pub fn generate(cfg: &SynthConfig) -> Vec<WebsiteRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let malicious_count = ((cfg.records as f64 * cfg.malicious_fraction) + 0.5).floor() as usize;
    let mut used = HashSet::new();
    let mut out = Vec::with_capacity(cfg.records);
    for i in 0..cfg.records {
        let label = if i < malicious_count {
            Label::Malicious
        } else {
            Label::Benign
        };
        let name = unique_name(&mut rng, label, &mut used);
        let whois = if cfg.whois_missing_fraction > 0.0 && rng.random_bool(cfg.whois_missing_fraction)
        {
            None
        } else {
            Some(synth_whois(&mut rng, label, cfg.reference_date))
        };
        let first_seen = if cfg.undated_fraction > 0.0 && rng.random_bool(cfg.undated_fraction) {
            None
        } else {
            Some(synth_first_seen(&mut rng, label, cfg.reference_date))
        };
        let source = match label {
            Label::Malicious => MALICIOUS_SOURCES[rng.random_range(0..MALICIOUS_SOURCES.len())],
            Label::Benign => "benign_feed",
        };
        out.push(WebsiteRecord {
            domain: normalize_domain(&name).expect("generated names are canonical"),
            label,
            first_seen,
            source: source.to_string(),
            whois,
        });
    }
    out
}

/// Paths of the feed and enrichment files written by [`write_ingest_files`].
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub malicious_csvs: Vec<PathBuf>,
    pub benign_csv: PathBuf,
    pub whois_jsonl: PathBuf,
}

/// Materialize records as pipeline input: one malicious feed CSV per source,
/// one benign feed CSV, and a WHOIS enrichment file covering every record
/// that has WHOIS data.
pub fn write_ingest_files(dir: &Path, records: &[WebsiteRecord]) -> Result<SynthFiles, IngestError> {
    let io_err = |path: &Path, e: std::io::Error| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let write_feed = |path: &Path, rows: &[&WebsiteRecord]| -> Result<(), IngestError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let csv_err = |e: csv::Error| io_err(path, std::io::Error::other(e));
        w.write_record(["domain", "first_seen"]).map_err(csv_err)?;
        for r in rows {
            let date = r.first_seen.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([r.domain.canonical(), &date]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(path, e))
    };

    let mut sources: Vec<&str> = records
        .iter()
        .filter(|r| r.label == Label::Malicious)
        .map(|r| r.source.as_str())
        .collect();
    sources.sort_unstable();
    sources.dedup();

    let mut malicious_csvs = Vec::new();
    for source in sources {
        let rows: Vec<&WebsiteRecord> = records
            .iter()
            .filter(|r| r.label == Label::Malicious && r.source == source)
            .collect();
        let path = dir.join(format!("{source}.csv"));
        write_feed(&path, &rows)?;
        malicious_csvs.push(path);
    }

    let benign_rows: Vec<&WebsiteRecord> = records
        .iter()
        .filter(|r| r.label == Label::Benign)
        .collect();
    let benign_csv = dir.join("benign_feed.csv");
    write_feed(&benign_csv, &benign_rows)?;

    let whois_jsonl = dir.join("whois.jsonl");
    write_enrichment(
        &whois_jsonl,
        records.iter().filter_map(|r| {
            r.whois
                .clone()
                .map(|w| (r.domain.canonical().to_string(), w))
        }),
    )?;

    Ok(SynthFiles {
        malicious_csvs,
        benign_csv,
        whois_jsonl,
    })
}
