//! Numeric features over labeled domains. Eleven slots: three WHOIS
//! lifetimes in days, a registrar reputation fraction, six lexical counts
//! over the canonical hostname, and a TLD reputation fraction. Reputation is
//! the share of a benign reference set using the same registrar or TLD.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::{normalize_registrar, Label, WebsiteRecord, WhoisRecord};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("whois record is missing dates required for lifetime features")]
    MissingWhoisDates,
    #[error("{field} is {days} days after the reference date")]
    NegativeLifetime { field: &'static str, days: i64 },
    #[error("no benign records to build a reputation table from")]
    EmptyBenignSet,
    #[error("feature {feature} unavailable for domain {domain}")]
    UnavailableFeature { domain: String, feature: String },
    #[error("unknown feature name: {0}")]
    UnknownFeature(String),
    #[error("feature mask selects no features")]
    EmptyMask,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

/// The eleven feature slots, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureId {
    DaysSinceCreation,
    DaysToExpiration,
    DaysSinceUpdate,
    RegistrarReputation,
    DotCount,
    HyphenCount,
    VowelCount,
    DigitFraction,
    UniqueAlnum,
    Entropy,
    TldReputation,
}

impl FeatureId {
    pub const ALL: [FeatureId; 11] = [
        FeatureId::DaysSinceCreation,
        FeatureId::DaysToExpiration,
        FeatureId::DaysSinceUpdate,
        FeatureId::RegistrarReputation,
        FeatureId::DotCount,
        FeatureId::HyphenCount,
        FeatureId::VowelCount,
        FeatureId::DigitFraction,
        FeatureId::UniqueAlnum,
        FeatureId::Entropy,
        FeatureId::TldReputation,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|f| *f == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        ["f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11"][self.index()]
    }

    pub fn from_name(name: &str) -> Option<FeatureId> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// True for the four slots that require a complete WHOIS record.
    pub fn needs_whois(self) -> bool {
        self.index() < 4
    }
}

/// Selection of feature slots a model consumes. Serialized as a list of
/// feature names so model files stay readable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct FeatureMask([bool; 11]);

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask([true; 11])
    }

    /// Lexical, statistical and TLD slots: dots, vowels, unique characters,
    /// entropy, TLD reputation. Hyphen count and digit fraction stay out of
    /// every experiment mask.
    pub fn lexical() -> Self {
        Self::from_features(&[
            FeatureId::DotCount,
            FeatureId::VowelCount,
            FeatureId::UniqueAlnum,
            FeatureId::Entropy,
            FeatureId::TldReputation,
        ])
    }

    /// The four WHOIS-derived slots.
    pub fn whois() -> Self {
        Self::from_features(&[
            FeatureId::DaysSinceCreation,
            FeatureId::DaysToExpiration,
            FeatureId::DaysSinceUpdate,
            FeatureId::RegistrarReputation,
        ])
    }

    /// Union of [`FeatureMask::lexical`] and [`FeatureMask::whois`].
    pub fn combined() -> Self {
        let mut mask = Self::whois().0;
        for (slot, lexical) in mask.iter_mut().zip(Self::lexical().0) {
            *slot |= lexical;
        }
        FeatureMask(mask)
    }

    pub fn from_features(features: &[FeatureId]) -> Self {
        let mut mask = [false; 11];
        for f in features {
            mask[f.index()] = true;
        }
        FeatureMask(mask)
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, FeatureError> {
        let mut mask = [false; 11];
        for name in names {
            let f = FeatureId::from_name(name.as_ref().trim())
                .ok_or_else(|| FeatureError::UnknownFeature(name.as_ref().to_string()))?;
            mask[f.index()] = true;
        }
        if mask.iter().all(|b| !b) {
            return Err(FeatureError::EmptyMask);
        }
        Ok(FeatureMask(mask))
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.0[f.index()]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn features(&self) -> Vec<FeatureId> {
        FeatureId::ALL
            .iter()
            .copied()
            .filter(|f| self.contains(*f))
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.features().iter().map(|f| f.name().to_string()).collect()
    }

    pub fn includes_whois(&self) -> bool {
        FeatureId::ALL
            .iter()
            .any(|f| f.needs_whois() && self.contains(*f))
    }
}

impl From<FeatureMask> for Vec<String> {
    fn from(mask: FeatureMask) -> Self {
        mask.names()
    }
}

impl TryFrom<Vec<String>> for FeatureMask {
    type Error = FeatureError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        FeatureMask::from_names(&names)
    }
}

/// One record's feature values plus per-slot availability. The four WHOIS
/// slots are available together or not at all; the lexical slots always are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; 11],
    pub available: [bool; 11],
    pub label: Label,
}

impl FeatureVector {
    pub fn whois_available(&self) -> bool {
        self.available[0]
    }

    pub fn get(&self, f: FeatureId) -> Option<f64> {
        self.available[f.index()].then(|| self.values[f.index()])
    }
}

/// A feature vector tied back to its domain string, the unit of the feature
/// CSV format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub domain: String,
    pub vector: FeatureVector,
}

#[derive(Debug, Clone)]
pub struct Featurized {
    pub vector: FeatureVector,
    /// True when a lenient lifetime computation clamped a negative value.
    pub clamped: bool,
}

pub fn f5_dot_count(s: &str) -> usize {
    s.chars().filter(|c| *c == '.').count()
}

pub fn f6_hyphen_count(s: &str) -> usize {
    s.chars().filter(|c| *c == '-').count()
}

pub fn f7_vowel_count(s: &str) -> usize {
    s.chars()
        .filter(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'))
        .count()
}

/// Digits over alphanumerics; structural punctuation is not part of the
/// denominator. 0 when the string has no alphanumerics at all.
pub fn f8_digit_fraction(s: &str) -> f64 {
    let alnum = s.chars().filter(char::is_ascii_alphanumeric).count();
    if alnum == 0 {
        return 0.0;
    }
    let digits = s.chars().filter(char::is_ascii_digit).count();
    digits as f64 / alnum as f64
}

pub fn f9_unique_alnum(s: &str) -> usize {
    let mut seen = [false; 36];
    for c in s.chars().map(|c| c.to_ascii_lowercase()) {
        match c {
            'a'..='z' => seen[c as usize - 'a' as usize] = true,
            '0'..='9' => seen[26 + c as usize - '0' as usize] = true,
            _ => {}
        }
    }
    seen.iter().filter(|b| **b).count()
}

/// Shannon entropy in bits of a discrete distribution given as occurrence
/// counts. Zero counts are ignored; an empty distribution has entropy 0.
pub fn entropy_from_counts(counts: impl IntoIterator<Item = usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut h = 0.0;
    for count in counts {
        if count == 0 {
            continue;
        }
        let p = count as f64 / total;
        h -= p * p.log2();
    }
    h
}

/// Entropy over the character frequency distribution of the whole string,
/// dots and hyphens included. Counts accumulate in character order; the sum
/// is order-sensitive at the last ulp and must not vary run to run.
pub fn f10_entropy(s: &str) -> f64 {
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for c in s.chars() {
        *counts.entry(c).or_insert(0) += 1;
    }
    entropy_from_counts(counts.into_values(), s.chars().count())
}

/// Share of a benign reference set per registrar and per TLD. Unseen keys
/// score exactly 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationTable {
    registrar_counts: BTreeMap<String, usize>,
    tld_counts: BTreeMap<String, usize>,
    benign_total: usize,
}

impl ReputationTable {
    pub fn registrar_reputation(&self, registrar: &str) -> f64 {
        let key = normalize_registrar(registrar);
        self.registrar_counts.get(&key).copied().unwrap_or(0) as f64 / self.benign_total as f64
    }

    pub fn tld_reputation(&self, tld: &str) -> f64 {
        self.tld_counts.get(tld).copied().unwrap_or(0) as f64 / self.benign_total as f64
    }

    pub fn benign_total(&self) -> usize {
        self.benign_total
    }
}

/// Count benign registrars and TLDs out of a dataset. Only benign records
/// contribute; the denominator is the full benign count whether or not a
/// record carries WHOIS data.
pub fn build_reputation(dataset: &Dataset) -> Result<ReputationTable, FeatureError> {
    let mut registrar_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut tld_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut benign_total = 0usize;
    for record in &dataset.records {
        if record.label != Label::Benign {
            continue;
        }
        benign_total += 1;
        *tld_counts.entry(record.domain.tld().to_string()).or_insert(0) += 1;
        if let Some(name) = record.whois.as_ref().and_then(|w| w.registrar_name.as_deref()) {
            *registrar_counts.entry(normalize_registrar(name)).or_insert(0) += 1;
        }
    }
    if benign_total == 0 {
        return Err(FeatureError::EmptyBenignSet);
    }
    Ok(ReputationTable {
        registrar_counts,
        tld_counts,
        benign_total,
    })
}

/// How to treat creation or update dates that fall after the reference date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LifetimeMode {
    /// Error out; the snapshot date is wrong or the record is corrupt.
    Strict,
    /// Clamp the negative lifetime to 0 and flag it.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lifetimes {
    pub days_since_creation: f64,
    pub days_to_expiration: f64,
    pub days_since_update: f64,
    pub clamped: bool,
}

/// Whole-day lifetimes against the dataset's reference date. Days since
/// creation and since update must not be negative (see [`LifetimeMode`]);
/// days to expiration may be, for already-expired domains.
pub fn whois_lifetimes(
    whois: &WhoisRecord,
    reference_date: NaiveDate,
    mode: LifetimeMode,
) -> Result<Lifetimes, FeatureError> {
    let (creation, expiration, updated) = match (
        whois.creation_date,
        whois.expiration_date,
        whois.updated_date,
    ) {
        (Some(c), Some(e), Some(u)) => (c, e, u),
        _ => return Err(FeatureError::MissingWhoisDates),
    };
    let since_creation = reference_date.signed_duration_since(creation).num_days();
    let to_expiration = expiration.signed_duration_since(reference_date).num_days();
    let since_update = reference_date.signed_duration_since(updated).num_days();

    let mut clamped = false;
    let mut guard = |field: &'static str, days: i64| -> Result<f64, FeatureError> {
        if days >= 0 {
            Ok(days as f64)
        } else {
            match mode {
                LifetimeMode::Strict => Err(FeatureError::NegativeLifetime { field, days }),
                LifetimeMode::Lenient => {
                    clamped = true;
                    Ok(0.0)
                }
            }
        }
    };
    let days_since_creation = guard("creation date", since_creation)?;
    let days_since_update = guard("updated date", since_update)?;
    Ok(Lifetimes {
        days_since_creation,
        days_to_expiration: to_expiration as f64,
        days_since_update,
        clamped,
    })
}

/// Compute all eleven slots for one record. Lexical slots always populate;
/// the WHOIS slots populate only when the record's WHOIS data is complete,
/// registrar included.
pub fn featurize(
    record: &WebsiteRecord,
    rep: &ReputationTable,
    reference_date: NaiveDate,
    mode: LifetimeMode,
) -> Result<Featurized, FeatureError> {
    let s = record.domain.canonical();
    let mut values = [0.0; 11];
    let mut available = [true; 11];
    values[FeatureId::DotCount.index()] = f5_dot_count(s) as f64;
    values[FeatureId::HyphenCount.index()] = f6_hyphen_count(s) as f64;
    values[FeatureId::VowelCount.index()] = f7_vowel_count(s) as f64;
    values[FeatureId::DigitFraction.index()] = f8_digit_fraction(s);
    values[FeatureId::UniqueAlnum.index()] = f9_unique_alnum(s) as f64;
    values[FeatureId::Entropy.index()] = f10_entropy(s);
    values[FeatureId::TldReputation.index()] = rep.tld_reputation(record.domain.tld());

    let mut clamped = false;
    if record.has_complete_whois() {
        let whois = record.whois.as_ref().unwrap();
        let lifetimes = whois_lifetimes(whois, reference_date, mode)?;
        clamped = lifetimes.clamped;
        values[FeatureId::DaysSinceCreation.index()] = lifetimes.days_since_creation;
        values[FeatureId::DaysToExpiration.index()] = lifetimes.days_to_expiration;
        values[FeatureId::DaysSinceUpdate.index()] = lifetimes.days_since_update;
        values[FeatureId::RegistrarReputation.index()] =
            rep.registrar_reputation(whois.registrar_name.as_deref().unwrap());
    } else {
        for f in FeatureId::ALL.iter().filter(|f| f.needs_whois()) {
            available[f.index()] = false;
        }
    }
    Ok(Featurized {
        vector: FeatureVector {
            values,
            available,
            label: record.label,
        },
        clamped,
    })
}

fn feature_header() -> Vec<&'static str> {
    let mut h = vec!["domain", "label"];
    h.extend(FeatureId::ALL.iter().map(|f| f.name()));
    h.push("avail_whois");
    h
}

/// Write feature rows as CSV. WHOIS slots of unavailable rows serialize as
/// empty cells; floats use the shortest round-trippable decimal form.
pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let file = File::create(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| FeatureError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    w.write_record(feature_header()).map_err(fail)?;
    for row in rows {
        let mut record = vec![row.domain.clone(), row.vector.label.as_str().to_string()];
        for f in FeatureId::ALL {
            if row.vector.available[f.index()] {
                record.push(format!("{}", row.vector.values[f.index()]));
            } else {
                record.push(String::new());
            }
        }
        record.push(row.vector.whois_available().to_string());
        w.write_record(&record).map_err(fail)?;
    }
    w.flush().map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Read a feature CSV written by [`write_features`].
pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>, FeatureError> {
    let file = File::open(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let fail = |reason: String| FeatureError::Format {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?;
    let expected = feature_header();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(fail(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let row_err = |reason: String| fail(format!("row {}: {reason}", i + 1));
        let domain = record.get(0).unwrap_or("").to_string();
        let label = match record.get(1) {
            Some("malicious") => Label::Malicious,
            Some("benign") => Label::Benign,
            other => return Err(row_err(format!("bad label {other:?}"))),
        };
        let mut values = [0.0; 11];
        let mut available = [true; 11];
        for f in FeatureId::ALL {
            let cell = record.get(2 + f.index()).unwrap_or("").trim();
            if cell.is_empty() {
                values[f.index()] = 0.0;
                available[f.index()] = false;
            } else {
                values[f.index()] = cell
                    .parse()
                    .map_err(|e| row_err(format!("bad {} value {cell:?}: {e}", f.name())))?;
            }
        }
        rows.push(FeatureRow {
            domain,
            vector: FeatureVector {
                values,
                available,
                label,
            },
        });
    }
    Ok(rows)
}

/// Project rows down to the masked columns, erroring if the mask demands a
/// slot some row does not have.
pub fn masked_matrix(
    rows: &[FeatureRow],
    mask: &FeatureMask,
) -> Result<(Vec<Vec<f64>>, Vec<Label>), FeatureError> {
    if mask.count() == 0 {
        return Err(FeatureError::EmptyMask);
    }
    let features = mask.features();
    let mut matrix = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        let mut out = Vec::with_capacity(features.len());
        for f in &features {
            if !row.vector.available[f.index()] {
                return Err(FeatureError::UnavailableFeature {
                    domain: row.domain.clone(),
                    feature: f.name().to_string(),
                });
            }
            out.push(row.vector.values[f.index()]);
        }
        matrix.push(out);
        labels.push(row.vector.label);
    }
    Ok((matrix, labels))
}
