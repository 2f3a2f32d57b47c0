//! Automatic detectors for five dataset error classes and the summary report.
//!
//! Every detector is a pure function of its text arguments. [`scan`] applies
//! them to each data point and reduces the flags into per-category and total
//! rejection frequencies. A data point counts once per category and once in
//! the total, however many flags it carries.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DataPoint};
use crate::metrics::tokenize;
use crate::text::{has_diacritic, squash_whitespace, strip_diacritics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    FileExtension,
    EmptyField,
    MissingAccents,
    TemplateTerm,
    IdenticalParaphrase,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::FileExtension,
        ErrorKind::EmptyField,
        ErrorKind::MissingAccents,
        ErrorKind::TemplateTerm,
        ErrorKind::IdenticalParaphrase,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::FileExtension => "File extensions",
            ErrorKind::EmptyField => "Empty field",
            ErrorKind::MissingAccents => "Missing accents",
            ErrorKind::TemplateTerm => "Template-like terms",
            ErrorKind::IdenticalParaphrase => "Identical paraphrase",
        }
    }
}

/// Which field of the data point carries the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Locus {
    Question,
    Paraphrase,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorFlag {
    pub kind: ErrorKind,
    pub locus: Locus,
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub extensions: Vec<String>,
    pub na_values: Vec<String>,
    pub braces: Vec<char>,
    extension_re: Regex,
}

impl ScanConfig {
    pub fn new(extensions: Vec<String>, na_values: Vec<String>, braces: Vec<char>) -> Self {
        let alternation = extensions
            .iter()
            .map(|e| regex::escape(e.trim_start_matches('.')))
            .collect::<Vec<_>>()
            .join("|");
        let extension_re = if extensions.is_empty() {
            // matches nothing
            Regex::new(r"[^\s\S]").unwrap()
        } else {
            Regex::new(&format!(r"(?i)\.(?:{alternation})\b")).expect("escaped alternation is valid")
        };
        let na_values = na_values.into_iter().map(|v| v.trim().to_lowercase()).collect();
        Self {
            extensions,
            na_values,
            braces,
            extension_re,
        }
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        Self::new(
            s(&["jpg", "jpeg", "png", "gif", "svg", "pdf", "tif", "tiff"]),
            s(&["n/a", "na", "none", "null", "nil", "-"]),
            vec!['{', '}'],
        )
    }
}

/// A `.ext` token for a configured image/document extension, case-insensitive.
pub fn detect_file_extension(text: &str, cfg: &ScanConfig) -> bool {
    cfg.extension_re.is_match(text)
}

/// Empty after trimming, or one of the configured N/A spellings.
pub fn detect_empty_or_na(text: &str, cfg: &ScanConfig) -> bool {
    let t = text.trim();
    t.is_empty() || cfg.na_values.iter().any(|na| t.to_lowercase() == *na)
}

/// A question token with a diacritic whose stripped form appears in the
/// paraphrase while the accented form does not.
pub fn detect_missing_accents(question: &str, paraphrase: &str) -> bool {
    let para: BTreeSet<String> = tokenize(paraphrase).into_iter().collect();
    tokenize(question)
        .iter()
        .filter(|w| has_diacritic(w))
        .any(|w| !para.contains(w.as_str()) && para.contains(&strip_diacritics(w)))
}

pub fn detect_template_terms(text: &str, cfg: &ScanConfig) -> bool {
    text.chars().any(|c| cfg.braces.contains(&c))
}

/// Equal after trimming, whitespace collapse and NFC; case-sensitive.
pub fn detect_identical(question: &str, paraphrase: &str) -> bool {
    squash_whitespace(question) == squash_whitespace(paraphrase)
}

fn locus(q: bool, p: bool) -> Option<Locus> {
    match (q, p) {
        (true, true) => Some(Locus::Both),
        (true, false) => Some(Locus::Question),
        (false, true) => Some(Locus::Paraphrase),
        (false, false) => None,
    }
}

/// All flags raised for one data point, in [`ErrorKind`] order.
pub fn flags_for(question: &str, paraphrase: &str, cfg: &ScanConfig) -> Vec<ErrorFlag> {
    let mut out = Vec::new();
    let mut push = |kind, l: Option<Locus>| {
        if let Some(locus) = l {
            out.push(ErrorFlag { kind, locus });
        }
    };
    push(
        ErrorKind::FileExtension,
        locus(
            detect_file_extension(question, cfg),
            detect_file_extension(paraphrase, cfg),
        ),
    );
    push(
        ErrorKind::EmptyField,
        locus(detect_empty_or_na(question, cfg), detect_empty_or_na(paraphrase, cfg)),
    );
    push(
        ErrorKind::MissingAccents,
        detect_missing_accents(question, paraphrase).then_some(Locus::Paraphrase),
    );
    push(
        ErrorKind::TemplateTerm,
        locus(
            detect_template_terms(question, cfg),
            detect_template_terms(paraphrase, cfg),
        ),
    );
    push(
        ErrorKind::IdenticalParaphrase,
        detect_identical(question, paraphrase).then_some(Locus::Both),
    );
    out
}

pub fn scan_point(dp: &DataPoint, cfg: &ScanConfig) -> Vec<ErrorFlag> {
    flags_for(&dp.question, &dp.paraphrase, cfg)
}

/// Percentage rounded to one decimal place.
pub fn round1(pct: f64) -> f64 {
    (pct * 10.0).round() / 10.0
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub kind: ErrorKind,
    pub label: String,
    pub count: usize,
    /// One decimal place.
    pub percent: f64,
    pub uids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub corpus_size: usize,
    pub categories: Vec<CategoryStat>,
    pub rejected_count: usize,
    /// One decimal place.
    pub rejected_percent: f64,
    /// Flags per flagged uid; unflagged uids are absent.
    pub flags: BTreeMap<String, Vec<ErrorFlag>>,
}

impl ErrorReport {
    pub fn category(&self, kind: ErrorKind) -> &CategoryStat {
        self.categories
            .iter()
            .find(|c| c.kind == kind)
            .expect("report carries every category")
    }

    pub fn is_flagged(&self, uid: &str) -> bool {
        self.flags.contains_key(uid)
    }

    /// Aligned two-column text table.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22} {:>13}\n", "Error category", "Frequency (%)"));
        out.push_str(&format!("{}\n", "-".repeat(36)));
        for c in &self.categories {
            out.push_str(&format!("{:<22} {:>13.1}\n", c.label, c.percent));
        }
        out.push_str(&format!("{}\n", "-".repeat(36)));
        out.push_str(&format!("{:<22} {:>13.1}\n", "Total", self.rejected_percent));
        out
    }
}

pub fn scan(corpus: &Corpus, cfg: &ScanConfig) -> ErrorReport {
    let mut flags = BTreeMap::new();
    for dp in corpus {
        let f = scan_point(dp, cfg);
        if !f.is_empty() {
            flags.insert(dp.uid.clone(), f);
        }
    }
    let total = corpus.len();
    let categories = ErrorKind::ALL
        .iter()
        .map(|&kind| {
            // corpus order, not uid order
            let uids: Vec<String> = corpus
                .iter()
                .filter(|dp| {
                    flags
                        .get(&dp.uid)
                        .is_some_and(|fs: &Vec<ErrorFlag>| fs.iter().any(|f| f.kind == kind))
                })
                .map(|dp| dp.uid.clone())
                .collect();
            CategoryStat {
                kind,
                label: kind.label().to_owned(),
                count: uids.len(),
                percent: round1(percent(uids.len(), total)),
                uids,
            }
        })
        .collect();
    ErrorReport {
        corpus_size: total,
        categories,
        rejected_count: flags.len(),
        rejected_percent: round1(percent(flags.len(), total)),
        flags,
    }
}

/// The corpus without any flagged data point.
pub fn filter_rejected(corpus: &Corpus, report: &ErrorReport) -> Corpus {
    corpus.retain(|dp| !report.is_flagged(&dp.uid))
}
