//! Shared domain types: normalized domain names, labels, WHOIS records and
//! the labeled website observations every other module consumes.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("nothing remains after normalizing {0:?}")]
    EmptyAfterNormalization(String),
    #[error("invalid character {ch:?} in domain {domain:?}")]
    InvalidCharacter { domain: String, ch: char },
    #[error("domain {0:?} contains an empty label")]
    EmptyLabel(String),
}

/// Class label. Malicious is the positive class for every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Malicious
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "malicious",
            Label::Benign => "benign",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A hostname in canonical form: lowercase, no scheme/path/port, no trailing
/// dot. `labels` always re-joins to `canonical` and the TLD is the last label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DomainName {
    raw: String,
    canonical: String,
    labels: Vec<String>,
}

impl DomainName {
    /// The domain string exactly as it was ingested.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Lowercase hostname with scheme, path, port and trailing dot stripped.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// Dot-separated labels of the canonical form, in order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Final label of the hostname.
    pub fn tld(&self) -> &str {
        self.labels.last().expect("labels are never empty")
    }
}

impl std::fmt::Display for DomainName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl From<DomainName> for String {
    fn from(d: DomainName) -> String {
        d.canonical
    }
}

impl TryFrom<String> for DomainName {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, ModelError> {
        normalize_domain(&s)
    }
}

/// Normalize a raw domain string into canonical form.
///
/// Strips, in order: surrounding whitespace, a scheme prefix (everything up
/// to and including `://`), a path suffix (from the first `/`), a `:port`
/// suffix and one trailing dot, then lowercases. Only `a-z`, `0-9`, `-`, `.`
/// and `_` may survive; anything else rejects the input.
pub fn normalize_domain(raw: &str) -> Result<DomainName, ModelError> {
    let mut s = raw.trim();
    if let Some(idx) = s.find("://") {
        s = &s[idx + 3..];
    }
    if let Some(idx) = s.find('/') {
        s = &s[..idx];
    }
    if let Some(idx) = s.find(':') {
        s = &s[..idx];
    }
    let s = s.strip_suffix('.').unwrap_or(s);
    if s.is_empty() {
        return Err(ModelError::EmptyAfterNormalization(raw.to_string()));
    }
    let canonical = s.to_lowercase();
    if let Some(ch) = canonical
        .chars()
        .find(|c| !matches!(c, 'a'..='z' | '0'..='9' | '-' | '.' | '_'))
    {
        return Err(ModelError::InvalidCharacter {
            domain: raw.to_string(),
            ch,
        });
    }
    let labels: Vec<String> = canonical.split('.').map(str::to_string).collect();
    if labels.iter().any(String::is_empty) {
        return Err(ModelError::EmptyLabel(raw.to_string()));
    }
    Ok(DomainName {
        raw: raw.to_string(),
        canonical,
        labels,
    })
}

/// Parse an ISO-8601 calendar date, truncating any time-of-day suffix
/// (`2020-03-01T00:00:00Z` becomes 2020-03-01).
pub fn parse_iso_date(value: &str) -> Option<NaiveDate> {
    let value = value.trim();
    let head = value.get(..10)?;
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

/// Registration metadata for a domain. All fields are optional; a record is
/// complete only when all four are present, which gates membership in the
/// WHOIS-complete partition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhoisRecord {
    pub registrar_name: Option<String>,
    pub creation_date: Option<NaiveDate>,
    pub expiration_date: Option<NaiveDate>,
    pub updated_date: Option<NaiveDate>,
}

impl WhoisRecord {
    pub fn is_complete(&self) -> bool {
        self.registrar_name.is_some()
            && self.creation_date.is_some()
            && self.expiration_date.is_some()
            && self.updated_date.is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.registrar_name.is_none()
            && self.creation_date.is_none()
            && self.expiration_date.is_none()
            && self.updated_date.is_none()
    }

    /// False when both dates are present and creation is after expiration.
    pub fn dates_ordered(&self) -> bool {
        match (self.creation_date, self.expiration_date) {
            (Some(c), Some(e)) => c <= e,
            _ => true,
        }
    }
}

/// Registrar names are compared lowercase with surrounding whitespace
/// trimmed; feeds are case-inconsistent.
pub fn normalize_registrar(name: &str) -> String {
    name.trim().to_lowercase()
}

/// One labeled domain observation, optionally enriched with WHOIS data and a
/// first-seen date for trend analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsiteRecord {
    pub domain: DomainName,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_seen: Option<NaiveDate>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whois: Option<WhoisRecord>,
}

impl WebsiteRecord {
    pub fn has_complete_whois(&self) -> bool {
        self.whois.as_ref().is_some_and(WhoisRecord::is_complete)
    }
}
