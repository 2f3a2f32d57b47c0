//! Scoring and report generation: per-candidate metric rows, per-type
//! aggregation, adequacy-vs-metric points, correlation tables and the
//! clean-vs-error label comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, QuestionType};
use crate::embeddings::{EmbedError, EmbeddingProvider};
use crate::metrics::{cosine_similarity, ibleu_parts, spearman_rho, IbleuConfig, MetricError};
use crate::paragen::CandidateParaphrase;
use crate::text::nfc;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("uid {0:?} is not in the corpus")]
    UnknownUid(String),
    #[error("no metric row for uid {uid:?} system {system:?}")]
    JoinFailure { uid: String, system: String },
    #[error("row {uid:?}/{system:?} has no {metric} score")]
    MissingMetric {
        uid: String,
        system: String,
        metric: Metric,
    },
    #[error("empty {0} record set")]
    EmptySet(&'static str),
    #[error("malformed input at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub uid: String,
    pub system: String,
    pub candidate: String,
    pub bleu_cr: f64,
    pub bleu_cs: f64,
    pub ibleu: f64,
    /// Absent when scoring ran without an embedding provider.
    pub cosine_cs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Ibleu,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Ibleu => "ibleu",
        }
    }

    pub fn value(self, row: &MetricRow) -> Option<f64> {
        match self {
            Metric::Cosine => row.cosine_cs,
            Metric::Ibleu => Some(row.ibleu),
        }
    }

    fn require(self, row: &MetricRow) -> Result<f64, HarnessError> {
        self.value(row).ok_or_else(|| HarnessError::MissingMetric {
            uid: row.uid.clone(),
            system: row.system.clone(),
            metric: self,
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(Metric::Cosine),
            "ibleu" => Ok(Metric::Ibleu),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Score each candidate against its data point: BLEU to the reference
/// paraphrase and to the source question, iBLEU, and optionally the cosine
/// similarity between candidate and source embeddings.
pub fn score_candidates(
    corpus: &Corpus,
    candidates: &[CandidateParaphrase],
    cfg: &IbleuConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<MetricRow>, HarnessError> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let point = corpus
            .get(&c.uid)
            .ok_or_else(|| HarnessError::UnknownUid(c.uid.clone()))?;
        let parts = ibleu_parts(&c.text, &point.paraphrase, &point.question, cfg);
        rows.push(MetricRow {
            uid: c.uid.clone(),
            system: c.system.clone(),
            candidate: c.text.clone(),
            bleu_cr: parts.bleu_cr,
            bleu_cs: parts.bleu_cs,
            ibleu: parts.ibleu,
            cosine_cs: None,
        });
    }
    if let Some(provider) = provider {
        let mut texts: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut slot = |t: &str, texts: &mut Vec<String>| {
            let key = nfc(t);
            *index.entry(key.clone()).or_insert_with(|| {
                texts.push(key);
                texts.len() - 1
            })
        };
        let pairs: Vec<(usize, usize)> = candidates
            .iter()
            .map(|c| {
                let src = &corpus.get(&c.uid).expect("checked above").question;
                (slot(&c.text, &mut texts), slot(src, &mut texts))
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = provider.embed_batch(&refs)?;
        for (row, (ci, si)) in rows.iter_mut().zip(pairs) {
            row.cosine_cs = Some(cosine_similarity(&vectors[ci].values, &vectors[si].values)?);
        }
    }
    Ok(rows)
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_metric_rows(text: &str) -> Result<Vec<MetricRow>, HarnessError> {
    parse_jsonl(text)
}

pub fn metric_rows_to_jsonl(rows: &[MetricRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}

/// Sum in a fixed value order so results do not depend on input order.
fn mean_std(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub system: String,
    /// None marks the per-system average over all types.
    pub qtype: Option<QuestionType>,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub metric: Metric,
    pub average: String,
    pub std: String,
    pub rows: Vec<AggregateRow>,
}

/// Mean and population standard deviation of `metric` per (system, type),
/// plus an item-weighted average per system. The best system per column is
/// flagged by highest mean; ties are all flagged.
pub fn aggregate_by_type(rows: &[MetricRow], corpus: &Corpus, metric: Metric) -> Result<AggregateReport, HarnessError> {
    let mut groups: BTreeMap<(String, Option<QuestionType>), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let point = corpus
            .get(&r.uid)
            .ok_or_else(|| HarnessError::UnknownUid(r.uid.clone()))?;
        let v = metric.require(r)?;
        groups.entry((r.system.clone(), Some(point.qtype))).or_default().push(v);
        groups.entry((r.system.clone(), None)).or_default().push(v);
    }
    let mut out: Vec<AggregateRow> = groups
        .into_iter()
        .map(|((system, qtype), mut values)| {
            let (mean, std) = mean_std(&mut values);
            AggregateRow {
                system,
                qtype,
                mean,
                std,
                n: values.len(),
                best: false,
            }
        })
        .collect();
    let mut best: HashMap<Option<QuestionType>, f64> = HashMap::new();
    for r in &out {
        let b = best.entry(r.qtype).or_insert(f64::NEG_INFINITY);
        *b = b.max(r.mean);
    }
    for r in &mut out {
        r.best = r.mean == best[&r.qtype];
    }
    // the average column goes last within each system
    out.sort_by(|a, b| {
        a.system
            .cmp(&b.system)
            .then_with(|| a.qtype.is_none().cmp(&b.qtype.is_none()))
            .then_with(|| a.qtype.cmp(&b.qtype))
    });
    Ok(AggregateReport {
        metric,
        average: "weighted-by-n".into(),
        std: "population".into(),
        rows: out,
    })
}

fn column_label(q: Option<QuestionType>) -> String {
    q.map_or_else(|| "Average".to_owned(), |q| q.as_str().to_owned())
}

fn aligned(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            write!(s, "{cell:<w$}").unwrap();
        }
        s.trim_end().to_owned() + "\n"
    };
    let mut out = line(header);
    out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in body {
        out += &line(row);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl AggregateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Systems as rows, types as columns, `mean ± std` cells; `*` marks the best system.
    pub fn to_text(&self) -> String {
        let columns: Vec<Option<QuestionType>> = {
            let mut c: Vec<_> = self
                .rows
                .iter()
                .filter_map(|r| r.qtype)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(Some)
                .collect();
            c.push(None);
            c
        };
        let systems: Vec<&str> = self
            .rows
            .iter()
            .map(|r| r.system.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut header = vec!["system".to_owned()];
        header.extend(columns.iter().map(|q| column_label(*q)));
        let body: Vec<Vec<String>> = systems
            .iter()
            .map(|s| {
                let mut row = vec![(*s).to_owned()];
                for q in &columns {
                    let cell = self.rows.iter().find(|r| r.system == *s && r.qtype == *q).map_or_else(
                        || "-".to_owned(),
                        |r| format!("{:.2} ± {:.2}{}", r.mean, r.std, if r.best { "*" } else { "" }),
                    );
                    row.push(cell);
                }
                row
            })
            .collect();
        format!(
            "{} by question type (mean ± population std, average weighted by n)\n",
            self.metric
        ) + &aligned(&header, &body)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,qtype,mean,std,n,best\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.system),
                column_label(r.qtype),
                r.mean,
                r.std,
                r.n,
                r.best
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdequacyLabel {
    Adequate,
    Inadequate,
    Trivial,
}

impl AdequacyLabel {
    pub const ALL: [AdequacyLabel; 3] = [
        AdequacyLabel::Adequate,
        AdequacyLabel::Inadequate,
        AdequacyLabel::Trivial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdequacyLabel::Adequate => "adequate",
            AdequacyLabel::Inadequate => "inadequate",
            AdequacyLabel::Trivial => "trivial",
        }
    }
}

impl FromStr for AdequacyLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown adequacy label {s:?}"))
    }
}

/// One human adequacy judgement; annotation exports deserialize directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyRecord {
    pub uid: String,
    pub system: String,
    pub label: AdequacyLabel,
    #[serde(default)]
    pub annotator: String,
    #[serde(default)]
    pub timestamp: String,
}

pub fn parse_adequacy_records(text: &str) -> Result<Vec<AdequacyRecord>, HarnessError> {
    parse_jsonl(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyPoint {
    pub system: String,
    pub n: usize,
    pub adequate_pct: f64,
    /// Mean over non-trivial records; None when every record is trivial.
    pub mean_metric: Option<f64>,
}

/// Per system: percentage of adequate labels over all records, and the mean
/// metric over the records not labelled trivial.
pub fn adequacy_vs_metric(
    records: &[AdequacyRecord],
    rows: &[MetricRow],
    metric: Metric,
) -> Result<Vec<AdequacyPoint>, HarnessError> {
    let by_key: HashMap<(&str, &str), &MetricRow> =
        rows.iter().map(|r| ((r.uid.as_str(), r.system.as_str()), r)).collect();
    let mut groups: BTreeMap<&str, (usize, usize, Vec<f64>)> = BTreeMap::new();
    for rec in records {
        let row = by_key
            .get(&(rec.uid.as_str(), rec.system.as_str()))
            .ok_or_else(|| HarnessError::JoinFailure {
                uid: rec.uid.clone(),
                system: rec.system.clone(),
            })?;
        let g = groups.entry(rec.system.as_str()).or_default();
        g.0 += 1;
        match rec.label {
            AdequacyLabel::Adequate => {
                g.1 += 1;
                g.2.push(metric.require(row)?);
            }
            AdequacyLabel::Inadequate => g.2.push(metric.require(row)?),
            AdequacyLabel::Trivial => {}
        }
    }
    Ok(groups
        .into_iter()
        .map(|(system, (n, adequate, mut values))| AdequacyPoint {
            system: system.to_owned(),
            n,
            adequate_pct: adequate as f64 * 100.0 / n as f64,
            mean_metric: (!values.is_empty()).then(|| mean_std(&mut values).0),
        })
        .collect())
}

pub fn adequacy_points_csv(points: &[AdequacyPoint]) -> String {
    let mut out = String::from("system,n,adequate_pct,mean_metric\n");
    for p in points {
        let m = p.mean_metric.map_or_else(String::new, |m| m.to_string());
        writeln!(out, "{},{},{},{}", csv_field(&p.system), p.n, p.adequate_pct, m).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    /// None for the all-types column.
    pub qtype: Option<QuestionType>,
    pub metric: Metric,
    pub rho: f64,
    pub systems: usize,
}

/// Spearman correlation across systems between adequate percentage and mean
/// metric. Points without a mean are left out.
pub fn correlation_cell(
    qtype: Option<QuestionType>,
    metric: Metric,
    points: &[AdequacyPoint],
) -> Result<CorrelationCell, HarnessError> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.mean_metric.map(|m| (p.adequate_pct, m)))
        .unzip();
    let rho = spearman_rho(&x, &y)?;
    Ok(CorrelationCell {
        qtype,
        metric,
        rho,
        systems: x.len(),
    })
}

/// One cell per (question type present in the records, metric), followed by
/// an all-types cell per metric.
pub fn correlation_table(
    records: &[AdequacyRecord],
    rows: &[MetricRow],
    corpus: &Corpus,
    metrics: &[Metric],
) -> Result<Vec<CorrelationCell>, HarnessError> {
    let mut by_type: BTreeMap<QuestionType, Vec<AdequacyRecord>> = BTreeMap::new();
    for r in records {
        let q = corpus
            .get(&r.uid)
            .ok_or_else(|| HarnessError::UnknownUid(r.uid.clone()))?
            .qtype;
        by_type.entry(q).or_default().push(r.clone());
    }
    let mut cells = Vec::new();
    for (q, recs) in &by_type {
        for &m in metrics {
            cells.push(correlation_cell(Some(*q), m, &adequacy_vs_metric(recs, rows, m)?)?);
        }
    }
    for &m in metrics {
        cells.push(correlation_cell(None, m, &adequacy_vs_metric(records, rows, m)?)?);
    }
    Ok(cells)
}

pub fn correlation_text(cells: &[CorrelationCell]) -> String {
    let metrics: Vec<Metric> = cells
        .iter()
        .map(|c| c.metric)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut columns: Vec<Option<QuestionType>> = Vec::new();
    for c in cells {
        if !columns.contains(&c.qtype) {
            columns.push(c.qtype);
        }
    }
    let mut header = vec!["metric".to_owned()];
    header.extend(
        columns
            .iter()
            .map(|q| q.map_or("All".to_owned(), |q| q.as_str().to_owned())),
    );
    let body: Vec<Vec<String>> = metrics
        .iter()
        .map(|m| {
            let mut row = vec![m.as_str().to_owned()];
            for q in &columns {
                row.push(
                    cells
                        .iter()
                        .find(|c| c.metric == *m && c.qtype == *q)
                        .map_or("-".to_owned(), |c| format!("{:.2}", c.rho)),
                );
            }
            row
        })
        .collect();
    "Spearman rho between adequate % and mean metric across systems\n".to_owned() + &aligned(&header, &body)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFrequencies {
    pub n: usize,
    pub adequate: f64,
    pub inadequate: f64,
    pub trivial: f64,
}

impl LabelFrequencies {
    fn of(records: &[AdequacyRecord], which: &'static str) -> Result<Self, HarnessError> {
        if records.is_empty() {
            return Err(HarnessError::EmptySet(which));
        }
        let n = records.len();
        let pct = |l: AdequacyLabel| records.iter().filter(|r| r.label == l).count() as f64 * 100.0 / n as f64;
        Ok(Self {
            n,
            adequate: pct(AdequacyLabel::Adequate),
            inadequate: pct(AdequacyLabel::Inadequate),
            trivial: pct(AdequacyLabel::Trivial),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEffect {
    pub clean: LabelFrequencies,
    pub error: LabelFrequencies,
}

impl ErrorEffect {
    pub fn to_text(&self) -> String {
        let header: Vec<String> = ["set", "n", "adequate %", "inadequate %", "trivial %"]
            .map(String::from)
            .to_vec();
        let row = |name: &str, f: &LabelFrequencies| {
            vec![
                name.to_owned(),
                f.n.to_string(),
                format!("{:.1}", f.adequate),
                format!("{:.1}", f.inadequate),
                format!("{:.1}", f.trivial),
            ]
        };
        aligned(&header, &[row("clean", &self.clean), row("error", &self.error)])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("set,n,adequate,inadequate,trivial\n");
        for (name, f) in [("clean", &self.clean), ("error", &self.error)] {
            writeln!(out, "{name},{},{},{},{}", f.n, f.adequate, f.inadequate, f.trivial).unwrap();
        }
        out
    }
}

/// Label percentages for records on error-free data points versus records on
/// data points containing dataset errors.
pub fn error_effect(clean: &[AdequacyRecord], error: &[AdequacyRecord]) -> Result<ErrorEffect, HarnessError> {
    Ok(ErrorEffect {
        clean: LabelFrequencies::of(clean, "clean")?,
        error: LabelFrequencies::of(error, "error")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DataPoint;

    fn corpus() -> Corpus {
        let mut a = DataPoint::new(
            "a",
            "What is the capital of France?",
            "Which city is the capital of France?",
        );
        a.qtype = QuestionType::SingleFact;
        let mut b = DataPoint::new("b", "How many moons does Mars have?", "Mars has how many moons?");
        b.qtype = QuestionType::Counting;
        Corpus::from_points(vec![a, b]).unwrap()
    }

    fn row(uid: &str, system: &str, ibleu: f64, cos: Option<f64>) -> MetricRow {
        MetricRow {
            uid: uid.into(),
            system: system.into(),
            candidate: String::new(),
            bleu_cr: 0.0,
            bleu_cs: 0.0,
            ibleu,
            cosine_cs: cos,
        }
    }

    fn rec(uid: &str, system: &str, label: AdequacyLabel) -> AdequacyRecord {
        AdequacyRecord {
            uid: uid.into(),
            system: system.into(),
            label,
            annotator: "x".into(),
            timestamp: String::new(),
        }
    }

    #[test]
    fn single_row_aggregate() {
        let r = aggregate_by_type(&[row("a", "en-fr", 0.5, None)], &corpus(), Metric::Ibleu).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!((r.rows[0].mean, r.rows[0].std, r.rows[0].n), (0.5, 0.0, 1));
        assert!(r.rows.iter().all(|x| x.best));
        assert!(r.rows[1].qtype.is_none());
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(
            aggregate_by_type(&[row("zz", "s", 0.1, None)], &corpus(), Metric::Ibleu),
            Err(HarnessError::UnknownUid(_))
        ));
        assert!(matches!(
            aggregate_by_type(&[row("a", "s", 0.1, None)], &corpus(), Metric::Cosine),
            Err(HarnessError::MissingMetric { .. })
        ));
    }

    #[test]
    fn adequacy_points() {
        let rows = [row("a", "s1", 0.2, Some(0.9)), row("b", "s1", 0.4, Some(0.5))];
        let all_adequate = [
            rec("a", "s1", AdequacyLabel::Adequate),
            rec("b", "s1", AdequacyLabel::Adequate),
        ];
        let p = adequacy_vs_metric(&all_adequate, &rows, Metric::Cosine).unwrap();
        assert_eq!(p[0].adequate_pct, 100.0);
        assert_eq!(p[0].mean_metric, Some(0.7));
        let all_trivial = [
            rec("a", "s1", AdequacyLabel::Trivial),
            rec("b", "s1", AdequacyLabel::Trivial),
        ];
        let p = adequacy_vs_metric(&all_trivial, &rows, Metric::Cosine).unwrap();
        assert_eq!((p[0].adequate_pct, p[0].mean_metric), (0.0, None));
        assert!(matches!(
            adequacy_vs_metric(&[rec("a", "s2", AdequacyLabel::Trivial)], &rows, Metric::Cosine),
            Err(HarnessError::JoinFailure { .. })
        ));
    }

    #[test]
    fn correlation_needs_two_systems() {
        let p = AdequacyPoint {
            system: "s".into(),
            n: 1,
            adequate_pct: 50.0,
            mean_metric: Some(0.5),
        };
        assert!(matches!(
            correlation_cell(None, Metric::Cosine, &[p]),
            Err(HarnessError::Metric(MetricError::DegenerateInput(_)))
        ));
    }

    #[test]
    fn monotone_systems_correlate() {
        let points: Vec<AdequacyPoint> = (0..6)
            .map(|i| AdequacyPoint {
                system: format!("s{i}"),
                n: 10,
                adequate_pct: 10.0 * i as f64,
                mean_metric: Some(0.5 + 0.01 * i as f64),
            })
            .collect();
        assert_eq!(correlation_cell(None, Metric::Cosine, &points).unwrap().rho, 1.0);
    }

    #[test]
    fn error_effect_identical_and_empty() {
        let recs = [
            rec("a", "s", AdequacyLabel::Adequate),
            rec("b", "s", AdequacyLabel::Trivial),
            rec("a", "t", AdequacyLabel::Inadequate),
            rec("b", "t", AdequacyLabel::Adequate),
        ];
        let e = error_effect(&recs, &recs).unwrap();
        assert_eq!(e.clean, e.error);
        assert_eq!(e.clean.adequate + e.clean.inadequate + e.clean.trivial, 100.0);
        assert!(matches!(error_effect(&recs, &[]), Err(HarnessError::EmptySet("error"))));
    }

    #[test]
    fn scoring_without_embeddings() {
        let c = corpus();
        let cand = [CandidateParaphrase {
            uid: "a".into(),
            system: "en-fr".into(),
            text: "Which city is the capital of France?".into(),
            provenance: Default::default(),
        }];
        let rows = score_candidates(&c, &cand, &IbleuConfig::default(), None).unwrap();
        assert_eq!(rows[0].bleu_cr, 1.0);
        assert_eq!(rows[0].cosine_cs, None);
        assert!((rows[0].ibleu - (0.7 * rows[0].bleu_cr - 0.3 * rows[0].bleu_cs)).abs() < 1e-12);
        let back = parse_metric_rows(&metric_rows_to_jsonl(&rows)).unwrap();
        assert_eq!(back, rows);
    }
}
