//! Recovery experiment: hard-to-parse paraphrases are paraphrased again and
//! the result is checked against the gold alist of the original question.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::template::{parse_question, ParseError, TemplateSet};
use super::{alist_equivalent, Alist};
use crate::paragen::TranslationService;
use crate::text::squash_whitespace;

pub const BUNDLED_CASES: &str = include_str!("../../data/recovery_cases.jsonl");

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("invalid case {uid}: {reason}")]
    InvalidCase { uid: String, reason: String },
    #[error("malformed case file at line {line}: {reason}")]
    MalformedCase { line: usize, reason: String },
    #[error("paraphraser failed on {uid}: {reason}")]
    Paraphraser { uid: String, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCase {
    pub uid: String,
    pub question: String,
    pub gold_alist: Alist,
    pub hard_paraphrase: String,
}

pub fn parse_cases(text: &str) -> Result<Vec<RecoveryCase>, RecoveryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RecoveryError::MalformedCase {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn load_cases(path: &Path) -> Result<Vec<RecoveryCase>, RecoveryError> {
    let text = fs::read_to_string(path).map_err(|e| RecoveryError::Io(format!("{}: {e}", path.display())))?;
    parse_cases(&text)
}

pub trait Paraphraser: Send + Sync {
    fn name(&self) -> String;
    fn paraphrase(&self, text: &str) -> Result<String, String>;
}

pub struct IdentityParaphraser;

impl Paraphraser for IdentityParaphraser {
    fn name(&self) -> String {
        "identity".into()
    }

    fn paraphrase(&self, text: &str) -> Result<String, String> {
        Ok(text.to_owned())
    }
}

/// Fixed input-to-output table, keyed by whitespace-squashed text.
pub struct LookupParaphraser {
    name: String,
    table: HashMap<String, String>,
}

#[derive(Deserialize)]
struct LookupRow {
    input: String,
    output: String,
}

impl LookupParaphraser {
    pub fn new(name: impl Into<String>, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            name: name.into(),
            table: pairs.into_iter().map(|(k, v)| (squash_whitespace(&k), v)).collect(),
        }
    }

    /// Maps every hard paraphrase back to its source question.
    pub fn oracle(cases: &[RecoveryCase]) -> Self {
        Self::new(
            "oracle",
            cases.iter().map(|c| (c.hard_paraphrase.clone(), c.question.clone())),
        )
    }

    /// JSONL rows `{"input": ..., "output": ...}`.
    pub fn load(path: &Path) -> Result<Self, RecoveryError> {
        let text = fs::read_to_string(path).map_err(|e| RecoveryError::Io(format!("{}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: LookupRow = serde_json::from_str(line).map_err(|e| RecoveryError::MalformedCase {
                line: i + 1,
                reason: e.to_string(),
            })?;
            pairs.push((row.input, row.output));
        }
        Ok(Self::new(format!("file:{}", path.display()), pairs))
    }
}

impl Paraphraser for LookupParaphraser {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn paraphrase(&self, text: &str) -> Result<String, String> {
        self.table
            .get(&squash_whitespace(text))
            .cloned()
            .ok_or_else(|| format!("no entry for {text:?}"))
    }
}

/// English to a pivot language and back.
pub struct BacktranslationParaphraser<S> {
    service: S,
    pivot: String,
}

impl<S: TranslationService> BacktranslationParaphraser<S> {
    pub fn new(service: S, pivot: impl Into<String>) -> Self {
        Self {
            service,
            pivot: pivot.into(),
        }
    }
}

impl<S: TranslationService> Paraphraser for BacktranslationParaphraser<S> {
    fn name(&self) -> String {
        format!("en-{}", self.pivot)
    }

    fn paraphrase(&self, text: &str) -> Result<String, String> {
        crate::paragen::backtranslate("", text, &self.pivot, &self.service)
            .map(|c| c.text)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseOutcome {
    Success,
    ParseFailed,
    ParsedInequivalent,
}

impl CaseOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseOutcome::Success => "success",
            CaseOutcome::ParseFailed => "parse-failed",
            CaseOutcome::ParsedInequivalent => "parsed-inequivalent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub uid: String,
    pub candidate: String,
    pub outcome: CaseOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Alist>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub paraphraser: String,
    pub total: usize,
    pub recovered: usize,
    pub rate: f64,
    pub cases: Vec<CaseResult>,
}

impl RecoveryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.cases.iter().map(|c| c.uid.len()).max().unwrap_or(3).max(3);
        writeln!(out, "paraphraser: {}", self.paraphraser).unwrap();
        writeln!(out, "{:<width$}  {:<19}  candidate", "uid", "outcome").unwrap();
        for c in &self.cases {
            writeln!(out, "{:<width$}  {:<19}  {}", c.uid, c.outcome.as_str(), c.candidate).unwrap();
        }
        writeln!(
            out,
            "recovered {}/{} ({:.1}%)",
            self.recovered,
            self.total,
            self.rate * 100.0
        )
        .unwrap();
        out
    }
}

/// Check every case up front: the question must parse to its gold alist and
/// the hard paraphrase must not parse at all.
fn validate_cases(cases: &[RecoveryCase], templates: &TemplateSet) -> Result<(), RecoveryError> {
    for c in cases {
        let invalid = |reason: String| RecoveryError::InvalidCase {
            uid: c.uid.clone(),
            reason,
        };
        match parse_question(&c.question, templates) {
            Ok(a) if alist_equivalent(&a, &c.gold_alist) => {}
            Ok(a) => {
                return Err(invalid(format!(
                    "question parses to {} not the gold alist",
                    a.to_json()
                )))
            }
            Err(e) => return Err(invalid(format!("question does not parse: {e}"))),
        }
        if let Ok(a) = parse_question(&c.hard_paraphrase, templates) {
            return Err(invalid(format!("hard paraphrase parses to {}", a.to_json())));
        }
    }
    Ok(())
}

pub fn recovery_experiment(
    cases: &[RecoveryCase],
    paraphraser: &dyn Paraphraser,
    templates: &TemplateSet,
) -> Result<RecoveryReport, RecoveryError> {
    validate_cases(cases, templates)?;
    let mut results = Vec::with_capacity(cases.len());
    for c in cases {
        let candidate = paraphraser
            .paraphrase(&c.hard_paraphrase)
            .map_err(|reason| RecoveryError::Paraphraser {
                uid: c.uid.clone(),
                reason,
            })?;
        let (outcome, parsed, parse_error) = match parse_question(&candidate, templates) {
            Ok(a) if alist_equivalent(&a, &c.gold_alist) => (CaseOutcome::Success, Some(a), None),
            Ok(a) => (CaseOutcome::ParsedInequivalent, Some(a), None),
            Err(e) => (CaseOutcome::ParseFailed, None, Some(e)),
        };
        results.push(CaseResult {
            uid: c.uid.clone(),
            candidate,
            outcome,
            parsed,
            parse_error,
        });
    }
    let recovered = results.iter().filter(|r| r.outcome == CaseOutcome::Success).count();
    let total = results.len();
    Ok(RecoveryReport {
        paraphraser: paraphraser.name(),
        total,
        recovered,
        rate: if total == 0 {
            0.0
        } else {
            recovered as f64 / total as f64
        },
        cases: results,
    })
}
