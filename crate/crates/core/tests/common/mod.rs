#![allow(dead_code)]

use std::path::PathBuf;

use paraqa::corpus::{load_dataset, Corpus, LoadOptions};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn json_fixture(name: &str) -> Value {
    serde_json::from_str(&read_fixture(name)).unwrap()
}

pub fn planted_corpus() -> Corpus {
    static CORPUS: std::sync::OnceLock<Corpus> = std::sync::OnceLock::new();
    CORPUS
        .get_or_init(|| load_dataset(&fixture("planted_corpus.json"), &LoadOptions::default()).unwrap())
        .clone()
}

/// Independent sentence BLEU: explicit n-gram lists, clipped counts by
/// linear search, geometric mean as a product root.
pub fn oracle_bleu(cand: &[String], reference: &[String], max_n: usize) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| -> Vec<Vec<String>> {
        if t.len() < n {
            return vec![];
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let mut product = 1.0f64;
    for n in 1..=max_n {
        let cg = grams(cand, n);
        let rg = grams(reference, n);
        let mut used = vec![false; rg.len()];
        let mut matched = 0usize;
        for g in &cg {
            if let Some(k) = (0..rg.len()).find(|&k| !used[k] && rg[k] == *g) {
                used[k] = true;
                matched += 1;
            }
        }
        let p = if matched > 0 {
            matched as f64 / cg.len() as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (cg.len() as f64 + 1.0)
        };
        product *= p;
    }
    let geo = product.powf(1.0 / max_n as f64);
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * geo
}

/// Rank-then-Pearson computed with a quadratic rank count.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
