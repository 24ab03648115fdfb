//! Aggregate views over the malicious slice of a dataset: most-abused
//! registrars, most-abused TLDs and per-source daily trends.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Label, WebsiteRecord};

#[derive(Debug, Error)]
pub enum CharacterizeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ranked (key, count) pairs: descending count, ascending key on ties.
/// `universe_size` is the number of records that were eligible to count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankTable {
    pub entries: Vec<(String, usize)>,
    pub universe_size: usize,
}

fn rank(counts: BTreeMap<String, usize>, universe_size: usize, top_n: usize) -> RankTable {
    let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(top_n);
    RankTable {
        entries,
        universe_size,
    }
}

/// Count malicious records per normalized registrar. Records without a
/// registrar are excluded from the universe.
pub fn rank_registrars(records: &[WebsiteRecord], top_n: usize) -> RankTable {
    let mut counts = BTreeMap::new();
    let mut universe = 0;
    for record in records.iter().filter(|r| r.label == Label::Malicious) {
        if let Some(name) = record.whois.as_ref().and_then(|w| w.registrar_name.as_ref()) {
            universe += 1;
            *counts.entry(name.clone()).or_insert(0) += 1;
        }
    }
    rank(counts, universe, top_n)
}

/// Count malicious records per TLD over every malicious record.
pub fn rank_tlds(records: &[WebsiteRecord], top_n: usize) -> RankTable {
    let mut counts = BTreeMap::new();
    let mut universe = 0;
    for record in records.iter().filter(|r| r.label == Label::Malicious) {
        universe += 1;
        *counts.entry(record.domain.tld().to_string()).or_insert(0) += 1;
    }
    rank(counts, universe, top_n)
}

/// Name of the cross-source series a [`TrendSeries`] always carries.
pub const MERGED_SERIES: &str = "(merged)";

/// Daily malicious-record counts per source plus a merged series; only dated
/// records contribute, the rest are tallied in `undated`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrendSeries {
    pub per_source: BTreeMap<String, BTreeMap<NaiveDate, usize>>,
    pub undated: usize,
}

impl TrendSeries {
    /// Highest daily count per series; the earliest date wins ties.
    pub fn peaks(&self) -> BTreeMap<String, (NaiveDate, usize)> {
        self.per_source
            .iter()
            .filter_map(|(source, days)| {
                days.iter()
                    .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(date, count)| (source.clone(), (*date, *count)))
            })
            .collect()
    }

    pub fn total(&self) -> usize {
        self.per_source
            .get(MERGED_SERIES)
            .map_or(0, |days| days.values().sum())
    }
}

/// Build per-source daily counts over dated malicious records.
pub fn trend(records: &[WebsiteRecord]) -> TrendSeries {
    let mut per_source: BTreeMap<String, BTreeMap<NaiveDate, usize>> = BTreeMap::new();
    let mut undated = 0;
    for record in records.iter().filter(|r| r.label == Label::Malicious) {
        match record.first_seen {
            Some(date) => {
                *per_source
                    .entry(record.source.clone())
                    .or_default()
                    .entry(date)
                    .or_insert(0) += 1;
                *per_source
                    .entry(MERGED_SERIES.to_string())
                    .or_default()
                    .entry(date)
                    .or_insert(0) += 1;
            }
            None => undated += 1,
        }
    }
    TrendSeries { per_source, undated }
}

fn open_csv(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CharacterizeError> {
    let file = File::create(path).map_err(|e| CharacterizeError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CharacterizeError + '_ {
    move |e| CharacterizeError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// Write a rank table as `<key_header>,count`.
pub fn write_rank_csv(
    path: &Path,
    table: &RankTable,
    key_header: &str,
) -> Result<(), CharacterizeError> {
    let mut w = open_csv(path)?;
    w.write_record([key_header, "count"]).map_err(csv_err(path))?;
    for (key, count) in &table.entries {
        w.write_record([key.as_str(), &count.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CharacterizeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Write a trend as `source,date,count` rows, sources and dates ascending.
pub fn write_trend_csv(path: &Path, series: &TrendSeries) -> Result<(), CharacterizeError> {
    let mut w = open_csv(path)?;
    w.write_record(["source", "date", "count"]).map_err(csv_err(path))?;
    for (source, days) in &series.per_source {
        for (date, count) in days {
            w.write_record([source.as_str(), &date.to_string(), &count.to_string()])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CharacterizeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Plain-text horizontal bars for a rank table, widest bar `width` chars.
pub fn render_bars(table: &RankTable, width: usize) -> String {
    let max = table.entries.first().map_or(0, |(_, c)| *c);
    if max == 0 {
        return String::new();
    }
    let key_width = table
        .entries
        .iter()
        .map(|(k, _)| k.chars().count())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (key, count) in &table.entries {
        let bar = "#".repeat((count * width).div_ceil(max));
        out.push_str(&format!("{key:<key_width$}  {bar} {count}\n"));
    }
    out
}
