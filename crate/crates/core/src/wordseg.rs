//! Dictionary word segmentation for domain labels, used to surface naming
//! themes. Minimum-cost dynamic programming over a frequency-ranked lexicon
//! with Zipf-style word costs; digits and punctuation are hard boundaries.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DomainName;

#[derive(Debug, Error)]
pub enum WordsegError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon line {line}: invalid word {word:?} (must be nonempty lowercase a-z)")]
    InvalidWord { line: usize, word: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

const BUILTIN_WORDS: &str = include_str!("wordseg_lexicon.txt");

/// Rank-ordered word list with Zipf costs: rank 1 is the most frequent word
/// and the cheapest. Unknown text is segmentable at a steep per-character
/// penalty so segmentation never fails.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: Vec<String>,
    costs: HashMap<String, f64>,
    max_word_len: usize,
    unknown_per_char: f64,
}

impl Lexicon {
    /// Build from rank-ordered words; the first occurrence of a duplicate
    /// keeps its rank, later ones are ignored.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self, WordsegError> {
        Self::build(words, None)
    }

    fn build<S: AsRef<str>>(raw: &[S], pricing_size: Option<usize>) -> Result<Self, WordsegError> {
        let mut words: Vec<String> = Vec::new();
        let mut seen: HashMap<String, ()> = HashMap::new();
        for (i, word) in raw.iter().enumerate() {
            let word = word.as_ref().trim();
            if word.is_empty() && raw[i].as_ref().trim().is_empty() {
                continue;
            }
            if word.is_empty() || !word.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(WordsegError::InvalidWord {
                    line: i + 1,
                    word: word.to_string(),
                });
            }
            if seen.insert(word.to_string(), ()).is_none() {
                words.push(word.to_string());
            }
        }
        if words.is_empty() {
            return Err(WordsegError::EmptyLexicon);
        }
        let n = pricing_size.unwrap_or(words.len()) as f64;
        let log_n1 = (n + 1.0).ln();
        let costs = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), ((i + 1) as f64 * log_n1).ln()))
            .collect();
        let max_word_len = words.iter().map(String::len).max().unwrap();
        Ok(Lexicon {
            words,
            costs,
            max_word_len,
            unknown_per_char: ((n + 1.0) * log_n1).ln(),
        })
    }

    /// Load a plain text lexicon, one word per line, rank = line number.
    pub fn from_file(path: &Path) -> Result<Self, WordsegError> {
        let text = std::fs::read_to_string(path).map_err(|e| WordsegError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        Self::from_words(&lines).map_err(|e| match e {
            WordsegError::InvalidWord { line, word } => WordsegError::Format {
                path: path.display().to_string(),
                reason: format!("line {line}: invalid word {word:?}"),
            },
            other => other,
        })
    }

    /// The bundled curated lexicon: theme vocabulary first, then common web
    /// and geographic words.
    pub fn builtin() -> Self {
        let lines: Vec<&str> = BUILTIN_WORDS.lines().collect();
        Self::from_words(&lines).expect("bundled lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn word_cost(&self, word: &str) -> Option<f64> {
        self.costs.get(word).copied()
    }

    pub fn unknown_cost(&self, len: usize) -> f64 {
        self.unknown_per_char * len as f64
    }

    fn piece_cost(&self, piece: &str) -> f64 {
        self.word_cost(piece)
            .unwrap_or_else(|| self.unknown_cost(piece.len()))
    }

    #[cfg(test)]
    pub(crate) fn with_pricing_size<S: AsRef<str>>(
        words: &[S],
        pricing_size: usize,
    ) -> Result<Self, WordsegError> {
        Self::build(words, Some(pricing_size))
    }
}

/// Tokens covering the input in order, plus the summed cost of the
/// alphabetic pieces. Digit-run tokens carry zero cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub pieces: Vec<String>,
    pub total_cost: f64,
}

const TIE_EPS: f64 = 1e-9;

// DP over one maximal alphabetic run. Candidate end positions are scanned
// left to right so cost ties resolve to fewer pieces, then to the split
// whose final piece is longest.
fn segment_run(run: &str, lex: &Lexicon, out: &mut Vec<String>) -> f64 {
    let chars: Vec<char> = run.chars().collect();
    let len = chars.len();
    let mut best_cost = vec![0.0f64; len + 1];
    let mut best_pieces = vec![0usize; len + 1];
    let mut back = vec![0usize; len + 1];
    for i in 1..=len {
        let window_start = i.saturating_sub(lex.max_word_len);
        let mut chosen: Option<(f64, usize, usize)> = None;
        for j in window_start..i {
            let piece: String = chars[j..i].iter().collect();
            let cand_cost = best_cost[j] + lex.piece_cost(&piece);
            let cand_pieces = best_pieces[j] + 1;
            let better = match chosen {
                None => true,
                Some((cost, pieces, _)) => {
                    cand_cost < cost - TIE_EPS
                        || ((cand_cost - cost).abs() <= TIE_EPS && cand_pieces < pieces)
                }
            };
            if better {
                chosen = Some((cand_cost, cand_pieces, j));
            }
        }
        let (cost, pieces, j) = chosen.expect("window always contains at least one candidate");
        best_cost[i] = cost;
        best_pieces[i] = pieces;
        back[i] = j;
    }

    let mut cuts = Vec::new();
    let mut i = len;
    while i > 0 {
        cuts.push((back[i], i));
        i = back[i];
    }
    for (start, end) in cuts.into_iter().rev() {
        out.push(chars[start..end].iter().collect());
    }
    best_cost[len]
}

/// Segment a string into lexicon words. Each maximal alphabetic run is
/// segmented independently; digit runs pass through as zero-cost tokens;
/// everything else is a silent boundary.
pub fn segment(s: &str, lex: &Lexicon) -> Segmentation {
    let s = s.to_lowercase();
    let mut pieces = Vec::new();
    let mut total_cost = 0.0;
    let mut rest = s.as_str();
    while !rest.is_empty() {
        let c = rest.chars().next().unwrap();
        if c.is_ascii_alphabetic() {
            let end = rest
                .find(|c: char| !c.is_ascii_alphabetic())
                .unwrap_or(rest.len());
            total_cost += segment_run(&rest[..end], lex, &mut pieces);
            rest = &rest[end..];
        } else if c.is_ascii_digit() {
            let end = rest
                .find(|c: char| !c.is_ascii_digit())
                .unwrap_or(rest.len());
            pieces.push(rest[..end].to_string());
            rest = &rest[end..];
        } else {
            rest = &rest[c.len_utf8()..];
        }
    }
    Segmentation { pieces, total_cost }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub keyword: String,
    pub count: usize,
}

/// Segment every domain's non-TLD labels and count the resulting tokens.
/// Pure digit tokens are not keywords by themselves, but an alphabetic token
/// directly followed by a digit token is additionally counted joined
/// ("covid" + "19" also counts "covid19"). Sorted by descending count, then
/// lexicographically.
pub fn extract_keywords(domains: &[DomainName], lex: &Lexicon) -> Vec<KeywordEntry> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for domain in domains {
        let labels = domain.labels();
        if labels.len() < 2 {
            continue;
        }
        for label in &labels[..labels.len() - 1] {
            let seg = segment(label, lex);
            for (i, piece) in seg.pieces.iter().enumerate() {
                let is_digits = piece.chars().all(|c| c.is_ascii_digit());
                if !is_digits {
                    *counts.entry(piece.clone()).or_insert(0) += 1;
                } else if i > 0 && seg.pieces[i - 1].chars().all(|c| c.is_ascii_alphabetic()) {
                    *counts
                        .entry(format!("{}{}", seg.pieces[i - 1], piece))
                        .or_insert(0) += 1;
                }
            }
        }
    }
    let mut entries: Vec<KeywordEntry> = counts
        .into_iter()
        .map(|(keyword, count)| KeywordEntry { keyword, count })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.keyword.cmp(&b.keyword)));
    entries
}

/// Write a keyword frequency table as `keyword,count` CSV.
pub fn write_keywords(path: &Path, entries: &[KeywordEntry]) -> Result<(), WordsegError> {
    let file = File::create(path).map_err(|e| WordsegError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| WordsegError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    w.write_record(["keyword", "count"]).map_err(fail)?;
    for entry in entries {
        w.write_record([entry.keyword.as_str(), &entry.count.to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| WordsegError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
