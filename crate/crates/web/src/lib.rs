//! Browser bindings for the demo page. Every export takes plain strings and
//! returns a JSON string so the page needs no generated type glue.

use paraqa::alist::{parse_question as parse_with, TemplateSet};
use paraqa::errscan::{flags_for, ScanConfig};
use paraqa::metrics::{ibleu_parts, IbleuConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// BLEU against reference and source, iBLEU at `alpha`, and iBLEU over an
/// alpha sweep from 0 to 1 in steps of 0.1.
#[wasm_bindgen]
pub fn score_pair(candidate: &str, reference: &str, source: &str, alpha: f64) -> String {
    let cfg = match IbleuConfig::with_alpha(alpha) {
        Ok(c) => c,
        Err(e) => return json!({ "error": e.to_string() }).to_string(),
    };
    let parts = ibleu_parts(candidate, reference, source, &cfg);
    let curve: Vec<Value> = (0..=10)
        .map(|i| {
            let a = i as f64 / 10.0;
            json!({ "alpha": a, "ibleu": a * parts.bleu_cr - (1.0 - a) * parts.bleu_cs })
        })
        .collect();
    json!({
        "bleu_cr": parts.bleu_cr,
        "bleu_cs": parts.bleu_cs,
        "ibleu": parts.ibleu,
        "curve": curve,
    })
    .to_string()
}

/// Dataset-error flags for one question/paraphrase pair.
#[wasm_bindgen]
pub fn scan_pair(question: &str, paraphrase: &str) -> String {
    let flags: Vec<Value> = flags_for(question, paraphrase, &ScanConfig::default())
        .into_iter()
        .map(|f| json!({ "kind": f.kind, "label": f.kind.label(), "locus": f.locus }))
        .collect();
    json!({ "flags": flags }).to_string()
}

/// Alist for a question under the bundled templates, or the parse error.
#[wasm_bindgen]
pub fn parse_question(question: &str) -> String {
    thread_local! {
        static TEMPLATES: TemplateSet = TemplateSet::bundled();
    }
    TEMPLATES.with(|set| match parse_with(question, set) {
        Ok(a) => json!({ "alist": serde_json::from_str::<Value>(&a.to_json()).unwrap_or(Value::Null) }).to_string(),
        Err(e) => json!({ "error": e.to_string(), "detail": e }).to_string(),
    })
}
