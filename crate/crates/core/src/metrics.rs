//! Sentence-level BLEU, iBLEU, cosine similarity and Spearman's rank correlation.
//!
//! BLEU here is the single-reference, sentence-level variant: the geometric
//! mean of clipped n-gram precisions for `n = 1..=max_n` times the brevity
//! penalty `min(1, exp(1 - r/c))`. With [`Smoothing::AddOne`], a zero match
//! count at order `n >= 2` becomes `(m + 1) / (M + 1)`; a zero unigram
//! precision always yields 0.
//!
//! iBLEU trades adequacy against the reference for dissimilarity to the source:
//! `alpha * BLEU(c, r) - (1 - alpha) * BLEU(c, s)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{nfc, split_tokens};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
}

/// NFC-normalize, lowercase, split on whitespace and cut punctuation into
/// standalone tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = nfc(text).to_lowercase();
    split_tokens(&lowered).into_iter().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    /// Add-one on zero-match orders `n >= 2`.
    #[default]
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerId {
    /// [`tokenize`].
    #[default]
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
    pub tokenizer: TokenizerId,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::AddOne,
            tokenizer: TokenizerId::Default,
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if !(1..=4).contains(&self.max_n) {
            return Err(MetricError::InvalidConfig(format!(
                "max_n must be in 1..=4, got {}",
                self.max_n
            )));
        }
        Ok(())
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        match self.tokenizer {
            TokenizerId::Default => tokenize(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbleuConfig {
    pub alpha: f64,
    pub bleu: BleuConfig,
}

impl Default for IbleuConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            bleu: BleuConfig::default(),
        }
    }
}

impl IbleuConfig {
    pub fn with_alpha(alpha: f64) -> Result<Self, MetricError> {
        let cfg = Self {
            alpha,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(MetricError::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        self.bleu.validate()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU over pre-tokenized input.
pub fn bleu_tokens(candidate: &[String], reference: &[String], cfg: &BleuConfig) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=cfg.max_n {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total = candidate.len().saturating_sub(n - 1);
        let matched: usize = cand
            .iter()
            .map(|(gram, &c)| c.min(refc.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matched > 0 {
            matched as f64 / total as f64
        } else if n >= 2 && cfg.smoothing == Smoothing::AddOne {
            1.0 / (total as f64 + 1.0)
        } else {
            return 0.0;
        };
        log_sum += precision.ln();
    }
    let geo = (log_sum / cfg.max_n as f64).exp();
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * geo).clamp(0.0, 1.0)
}

/// Sentence BLEU of `candidate` against a single `reference`.
pub fn bleu(candidate: &str, reference: &str, cfg: &BleuConfig) -> f64 {
    bleu_tokens(&cfg.tokenize(candidate), &cfg.tokenize(reference), cfg)
}

/// The two BLEU terms and the combined iBLEU score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbleuParts {
    pub bleu_cr: f64,
    pub bleu_cs: f64,
    pub ibleu: f64,
}

pub fn ibleu_combine(alpha: f64, bleu_cr: f64, bleu_cs: f64) -> f64 {
    alpha * bleu_cr - (1.0 - alpha) * bleu_cs
}

pub fn ibleu_parts(candidate: &str, reference: &str, source: &str, cfg: &IbleuConfig) -> IbleuParts {
    let c = cfg.bleu.tokenize(candidate);
    let bleu_cr = bleu_tokens(&c, &cfg.bleu.tokenize(reference), &cfg.bleu);
    let bleu_cs = bleu_tokens(&c, &cfg.bleu.tokenize(source), &cfg.bleu);
    IbleuParts {
        bleu_cr,
        bleu_cs,
        ibleu: ibleu_combine(cfg.alpha, bleu_cr, bleu_cs),
    }
}

pub fn ibleu(candidate: &str, reference: &str, source: &str, cfg: &IbleuConfig) -> f64 {
    ibleu_parts(candidate, reference, source, cfg).ibleu
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Fractional (1-based) ranks; tied values share the mean of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean((i+1)..=j)
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho: Pearson correlation of fractional ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::DegenerateInput(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(MetricError::DegenerateInput("NaN in input".into()));
    }
    for (name, list) in [("x", x), ("y", y)] {
        if list.iter().all(|v| *v == list[0]) {
            return Err(MetricError::DegenerateInput(format!("{name} is constant")));
        }
    }
    Ok(pearson(&fractional_ranks(x), &fractional_ranks(y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Who's there?"), toks("who 's there ?"));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A  B"), toks("a b"));
    }

    #[test]
    fn bleu_edges() {
        let cfg = BleuConfig::default();
        assert_eq!(
            bleu("what is the capital of france", "what is the capital of france", &cfg),
            1.0
        );
        assert_eq!(bleu("alpha beta gamma", "one two three four", &cfg), 0.0);
        assert_eq!(bleu("", "anything at all", &cfg), 0.0);
        assert_eq!(bleu("?!", "", &cfg), 0.0);
        let unsmoothed = BleuConfig {
            smoothing: Smoothing::None,
            ..cfg
        };
        // no 4-gram in common: unsmoothed collapses, smoothed does not
        assert_eq!(bleu("who is the king", "who is a king", &unsmoothed), 0.0);
        assert!(bleu("who is the king", "who is a king", &cfg) > 0.0);
    }

    #[test]
    fn bleu_config_bounds() {
        let bad = BleuConfig {
            max_n: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(IbleuConfig::with_alpha(1.2).is_err());
        assert!(IbleuConfig::with_alpha(0.0).is_ok());
    }

    #[test]
    fn ibleu_examples() {
        let cfg = IbleuConfig::default();
        let c = "how many people live in france today";
        let v = ibleu(c, c, "zebra quokka okapi", &cfg);
        assert!((v - 0.7).abs() < 1e-12);
        let v = ibleu(c, c, c, &cfg);
        assert!((v - 0.4).abs() < 1e-12);
        assert_eq!(format!("{v:.2}"), "0.40");
        let zero = IbleuConfig::with_alpha(0.0).unwrap();
        assert_eq!(ibleu(c, "x y z", c, &zero), -1.0);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]), Ok(1.0));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), Ok(0.0));
        assert_eq!(cosine_similarity(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]), Ok(-1.0));
        assert_eq!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(MetricError::DimensionMismatch(1, 2))
        );
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]),
            Err(MetricError::ZeroVector)
        );
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Ok(1.0));
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Ok(-1.0));
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::DegenerateInput(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0], &[1.0]),
            Err(MetricError::DegenerateInput(_))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(fractional_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(fractional_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }
}
