//! Feed-file parsing and dataset assembly: labeled domain feeds come in as
//! CSV, WHOIS enrichment as line-delimited JSON, and the merged result is
//! deduplicated and split into WHOIS-complete and WHOIS-absent partitions.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_domain, parse_iso_date, Label, WebsiteRecord, WhoisRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("source tag must be non-empty")]
    EmptySource,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.display().to_string()),
        _ => IngestError::Io {
            path: path.display().to_string(),
            source: e,
        },
    })
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One skipped input row: 1-based data-row number plus the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub row: usize,
    pub reason: String,
}

/// Records parsed from one feed plus the rows that had to be skipped.
#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<WebsiteRecord>,
    pub skips: Vec<SkipEntry>,
}

/// Parse a domain feed: CSV with a header, a required `domain` column and an
/// optional `first_seen` ISO date column. Malformed rows are skipped and
/// tallied, never fatal.
pub fn load_domains(
    path: &Path,
    label: Label,
    source: &str,
) -> Result<LoadOutcome, IngestError> {
    if source.trim().is_empty() {
        return Err(IngestError::EmptySource);
    }
    let file = open(path)?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers().map_err(|e| IngestError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let domain_col = headers
        .iter()
        .position(|h| h.trim() == "domain")
        .ok_or_else(|| IngestError::Format {
            path: path.display().to_string(),
            reason: "missing required column `domain`".to_string(),
        })?;
    let first_seen_col = headers.iter().position(|h| h.trim() == "first_seen");

    let mut out = LoadOutcome::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let mut skip = |reason: String| {
            out.skips.push(SkipEntry {
                row: row_no,
                reason,
            })
        };
        let record = match row {
            Ok(r) => r,
            Err(e) => {
                skip(format!("unreadable row: {e}"));
                continue;
            }
        };
        let raw = record.get(domain_col).unwrap_or("").trim();
        if raw.is_empty() {
            skip("empty domain cell".to_string());
            continue;
        }
        let domain = match normalize_domain(raw) {
            Ok(d) => d,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let first_seen = match first_seen_col.map(|c| record.get(c).unwrap_or("").trim()) {
            None | Some("") => None,
            Some(cell) => match parse_iso_date(cell) {
                Some(d) => Some(d),
                None => {
                    skip(format!("unparsable first_seen date {cell:?}"));
                    continue;
                }
            },
        };
        out.records.push(WebsiteRecord {
            domain,
            label,
            first_seen,
            source: source.to_string(),
            whois: None,
        });
    }
    Ok(out)
}

/// Wire format of one WHOIS enrichment line. Dates are ISO strings so that
/// parse failures can be tolerated field by field.
#[derive(Debug, Serialize, Deserialize)]
pub struct EnrichmentRow {
    pub domain: String,
    pub registrar_name: Option<String>,
    pub creation_date: Option<String>,
    pub expiration_date: Option<String>,
    pub updated_date: Option<String>,
}

#[derive(Debug, Default)]
pub struct AttachOutcome {
    pub records: Vec<WebsiteRecord>,
    /// Number of records whose whois field was populated.
    pub matched: usize,
    pub skips: Vec<SkipEntry>,
}

fn parse_enrichment_date(
    value: &Option<String>,
    field: &str,
    row: usize,
    skips: &mut Vec<SkipEntry>,
) -> Option<NaiveDate> {
    let raw = value.as_deref()?.trim();
    if raw.is_empty() {
        return None;
    }
    match parse_iso_date(raw) {
        Some(d) => Some(d),
        None => {
            skips.push(SkipEntry {
                row,
                reason: format!("unparsable {field} date {raw:?}, field left absent"),
            });
            None
        }
    }
}

/// Join a WHOIS enrichment file onto the records, keyed by canonical domain.
/// Rows whose creation date falls after their expiration date are rejected
/// whole; individual unparsable dates only blank that field.
pub fn attach_whois(
    records: Vec<WebsiteRecord>,
    path: &Path,
) -> Result<AttachOutcome, IngestError> {
    let file = open(path)?;
    let mut skips = Vec::new();
    let mut by_domain: HashMap<String, WhoisRecord> = HashMap::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EnrichmentRow = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                skips.push(SkipEntry {
                    row,
                    reason: format!("unparsable enrichment row: {e}"),
                });
                continue;
            }
        };
        let domain = match normalize_domain(&parsed.domain) {
            Ok(d) => d,
            Err(e) => {
                skips.push(SkipEntry {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let whois = WhoisRecord {
            registrar_name: parsed
                .registrar_name
                .as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            creation_date: parse_enrichment_date(&parsed.creation_date, "creation", row, &mut skips),
            expiration_date: parse_enrichment_date(
                &parsed.expiration_date,
                "expiration",
                row,
                &mut skips,
            ),
            updated_date: parse_enrichment_date(&parsed.updated_date, "updated", row, &mut skips),
        };
        if !whois.dates_ordered() {
            skips.push(SkipEntry {
                row,
                reason: "creation date after expiration date, row rejected".to_string(),
            });
            continue;
        }
        by_domain.insert(domain.canonical().to_string(), whois);
    }

    let mut out = AttachOutcome {
        records,
        matched: 0,
        skips,
    };
    for record in &mut out.records {
        if let Some(whois) = by_domain.get(record.domain.canonical()) {
            record.whois = Some(whois.clone());
            out.matched += 1;
        }
    }
    Ok(out)
}

/// Counters from deduplicating merged feeds.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    /// Rows that collided with an earlier occurrence of the same canonical domain.
    pub duplicates: usize,
    /// Collisions where the two feeds disagreed on the label.
    pub label_conflicts: usize,
}

/// A deduplicated set of labeled records with the date all lifetime features
/// are computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<WebsiteRecord>,
    pub reference_date: NaiveDate,
}

impl Dataset {
    /// Merge records into a dataset with unique canonical domains. On a
    /// collision the later occurrence wins, except that a malicious label
    /// always beats a benign one (feeds are authoritative for maliciousness;
    /// the conflict is still counted).
    pub fn from_records(
        records: impl IntoIterator<Item = WebsiteRecord>,
        reference_date: NaiveDate,
    ) -> (Self, MergeStats) {
        let mut stats = MergeStats::default();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut merged: Vec<WebsiteRecord> = Vec::new();
        for record in records {
            match index.get(record.domain.canonical()) {
                None => {
                    index.insert(record.domain.canonical().to_string(), merged.len());
                    merged.push(record);
                }
                Some(&at) => {
                    stats.duplicates += 1;
                    let existing = &merged[at];
                    if existing.label != record.label {
                        stats.label_conflicts += 1;
                        if record.label == Label::Malicious {
                            merged[at] = record;
                        }
                    } else {
                        merged[at] = record;
                    }
                }
            }
        }
        (
            Dataset {
                records: merged,
                reference_date,
            },
            stats,
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }
}

/// WHOIS-complete and WHOIS-absent halves of a dataset. Disjoint by
/// construction; their union is the input.
#[derive(Debug, Clone)]
pub struct DatasetPartition {
    pub with_whois: Dataset,
    pub without_whois: Dataset,
}

/// Split a dataset by WHOIS completeness. Every record lands in exactly one
/// side.
pub fn partition(dataset: Dataset) -> DatasetPartition {
    let reference_date = dataset.reference_date;
    let (with, without): (Vec<_>, Vec<_>) = dataset
        .records
        .into_iter()
        .partition(WebsiteRecord::has_complete_whois);
    DatasetPartition {
        with_whois: Dataset {
            records: with,
            reference_date,
        },
        without_whois: Dataset {
            records: without,
            reference_date,
        },
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    reference_date: NaiveDate,
}

/// Write a dataset as line-delimited JSON: one meta line carrying the
/// reference date, then one record per line.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let meta = DatasetMeta {
        reference_date: dataset.reference_date,
    };
    serde_json::to_writer(&mut w, &meta).map_err(|e| IngestError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for record in &dataset.records {
        serde_json::to_writer(&mut w, record).map_err(|e| IngestError::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read a dataset written by [`write_dataset`]. Records run through the same
/// dedup as live ingestion so file edits cannot break the uniqueness invariant.
pub fn read_dataset(path: &Path) -> Result<Dataset, IngestError> {
    let file = open(path)?;
    let mut lines = BufReader::new(file).lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| IngestError::Format {
            path: path.display().to_string(),
            reason: "empty dataset file".to_string(),
        })?
        .map_err(|e| io_err(path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_line).map_err(|e| IngestError::Format {
        path: path.display().to_string(),
        reason: format!("bad meta line: {e}"),
    })?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: WebsiteRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::Format {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    let (dataset, _) = Dataset::from_records(records, meta.reference_date);
    Ok(dataset)
}

/// Write a skip report as line-delimited `{row, reason}` records.
pub fn write_skips(path: &Path, skips: &[SkipEntry]) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for entry in skips {
        serde_json::to_writer(&mut w, entry).map_err(|e| IngestError::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Write WHOIS records in the enrichment wire format consumed by
/// [`attach_whois`].
pub fn write_enrichment(
    path: &Path,
    rows: impl IntoIterator<Item = (String, WhoisRecord)>,
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for (domain, whois) in rows {
        let row = EnrichmentRow {
            domain,
            registrar_name: whois.registrar_name,
            creation_date: whois.creation_date.map(|d| d.to_string()),
            expiration_date: whois.expiration_date.map(|d| d.to_string()),
            updated_date: whois.updated_date.map(|d| d.to_string()),
        };
        serde_json::to_writer(&mut w, &row).map_err(|e| IngestError::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
