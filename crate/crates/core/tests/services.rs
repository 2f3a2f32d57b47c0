mod common;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use common::{fixture, planted_corpus};
use paraqa::embeddings::{
    similarity_cs, CachedProvider, EmbedError, EmbeddingProvider, EmbeddingVector, FileStore, HttpProvider,
    ProviderConfig,
};
use paraqa::harness::score_candidates;
use paraqa::metrics::IbleuConfig;
use paraqa::paragen::{
    backtranslate, backtranslate_corpus, load_candidates, ppdb_load, ppdb_paraphrase, EchoService, HttpTranslator,
    ParagenError, Relation, ReplayService, TranslationService,
};
use serde_json::{json, Value};

/// Serve `router` on an ephemeral port from a background runtime.
fn spawn(router: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, router).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn embed_server(calls: Arc<AtomicUsize>) -> String {
    spawn(Router::new().route(
        "/embed",
        post(move |Json(body): Json<Value>| {
            let calls = calls.clone();
            async move {
                calls.fetch_add(1, Ordering::SeqCst);
                let texts = body["texts"].as_array().unwrap();
                let vectors: Vec<Vec<f64>> = texts
                    .iter()
                    .map(|t| {
                        let s = t.as_str().unwrap();
                        vec![s.len() as f64, s.matches(' ').count() as f64 + 1.0]
                    })
                    .collect();
                Json(json!({"model_id": "mock-2d", "vectors": vectors}))
            }
        }),
    ))
}

#[test]
fn http_embedding_contract() {
    let calls = Arc::new(AtomicUsize::new(0));
    let base = embed_server(calls.clone());
    let provider = CachedProvider::new(HttpProvider::new(&base));
    let v = provider.embed_batch(&["ab", "a b", "ab"]).unwrap();
    assert_eq!(v[0].values, [2.0, 1.0]);
    assert_eq!(v[1].values, [3.0, 2.0]);
    assert_eq!(v[0].model_id, "mock-2d");
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    provider.embed_batch(&["a b"]).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    assert_eq!(provider.cached_len(), 2);

    let cfg = ProviderConfig::parse(&format!("http:{base}")).unwrap();
    let p = cfg.build().unwrap();
    let sim = similarity_cs("ab", "ab", p.as_ref()).unwrap();
    assert!((sim - 1.0).abs() < 1e-12);
}

#[test]
fn http_embedding_failures() {
    let failing = spawn(Router::new().route("/embed", post(|| async { StatusCode::SERVICE_UNAVAILABLE })));
    assert!(matches!(
        HttpProvider::new(&failing).embed_batch(&["x"]),
        Err(EmbedError::ServiceUnavailable(_))
    ));
    let short = spawn(Router::new().route(
        "/embed",
        post(|| async { Json(json!({"model_id": "m", "vectors": [[1.0]]})) }),
    ));
    assert!(matches!(
        HttpProvider::new(&short).embed_batch(&["x", "y"]),
        Err(EmbedError::MalformedResponse(_))
    ));
    // nothing listens on port 9 of localhost
    assert!(matches!(
        HttpProvider::new("http://127.0.0.1:9").embed_batch(&["x"]),
        Err(EmbedError::ServiceUnavailable(_))
    ));
}

#[test]
fn http_translation_contract() {
    let base = spawn(Router::new().route(
        "/translate",
        post(|Json(body): Json<Value>| async move {
            let text = body["text"].as_str().unwrap();
            let out = format!(
                "[{}>{}] {}",
                body["src"].as_str().unwrap(),
                body["tgt"].as_str().unwrap(),
                text
            );
            Json(json!({ "text": out }))
        }),
    ));
    let t = HttpTranslator::new(&base);
    let c = backtranslate("u1", "Who is it?", "fr", &t).unwrap();
    assert_eq!(c.text, "[fr>en] [en>fr] Who is it?");
    assert_eq!(c.system, "en-fr");
    assert!(matches!(
        backtranslate("u1", "x", "xx", &t),
        Err(ParagenError::UnsupportedPivot(_))
    ));
}

#[test]
fn file_store_fixture() {
    let store = FileStore::load(&fixture("embeddings.jsonl")).unwrap();
    assert_eq!((store.len(), store.dim(), store.model_id()), (3, 3, "fixture-3d"));
    let s = similarity_cs("Who governs Paris as mayor?", "Who is the mayor of Paris?", &store).unwrap();
    assert!((s - 0.6).abs() < 1e-12);
    let o = similarity_cs("How tall is Mount Everest?", "Who is the mayor of Paris?", &store).unwrap();
    assert_eq!(o, 0.0);
    assert!(matches!(
        similarity_cs("unknown", "Who is the mayor of Paris?", &store),
        Err(EmbedError::MissingEmbedding(_))
    ));
}

struct Counting(AtomicUsize);

impl EmbeddingProvider for Counting {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        self.0.fetch_add(texts.len(), Ordering::SeqCst);
        Ok(texts
            .iter()
            .map(|t| EmbeddingVector {
                values: vec![1.0, t.len() as f64],
                model_id: "count".into(),
            })
            .collect())
    }
}

#[test]
fn scoring_with_embeddings_dedupes_texts() {
    let corpus = planted_corpus();
    let cands = load_candidates(&fixture("candidates.jsonl"), Some(&corpus)).unwrap();
    assert!(cands.unknown_uids.is_empty());
    assert_eq!(cands.candidates.len(), 6);
    let provider = Counting(AtomicUsize::new(0));
    let rows = score_candidates(&corpus, &cands.candidates, &IbleuConfig::default(), Some(&provider)).unwrap();
    // three sources plus two en-de rewrites; every other candidate repeats its source
    assert_eq!(provider.0.load(Ordering::SeqCst), 5);
    for r in &rows {
        assert!((r.ibleu - (0.7 * r.bleu_cr - 0.3 * r.bleu_cs)).abs() <= 1e-12);
        let cos = r.cosine_cs.unwrap();
        assert!((-1.0..=1.0).contains(&cos));
        if r.system == "en-fr" {
            assert_eq!(r.bleu_cs, 1.0);
            assert!((cos - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn replay_and_corpus_backtranslation() {
    let svc = ReplayService::load(&fixture("translations.jsonl")).unwrap();
    let corpus = planted_corpus();
    let q = &corpus.points()[0].question;
    let c = backtranslate("fx-001", q, "fr", &svc).unwrap();
    assert_eq!(c.text, q.replace("What is", "Tell me"));
    assert!(!svc.supports_pivot("de"));
    let all = backtranslate_corpus(&corpus, "de", &EchoService, 3).unwrap();
    let uids: Vec<_> = all.iter().map(|c| c.uid.as_str()).collect();
    let want: Vec<_> = corpus.iter().map(|d| d.uid.as_str()).collect();
    assert_eq!(uids, want);
    assert!(all.iter().zip(corpus.iter()).all(|(c, d)| c.text == d.question));
}

#[test]
fn ppdb_fixture_queries() {
    let all: BTreeSet<Relation> = Relation::ALL.into_iter().collect();
    let idx = ppdb_load(&fixture("ppdb_sample.txt"), 0.0, &all).unwrap();
    let got: Vec<_> = ppdb_paraphrase(&idx, "size", 5)
        .iter()
        .map(|e| e.rhs_phrase.as_str())
        .collect();
    assert_eq!(got, ["file size", "dimensions", "magnitude"]);
    assert_eq!(ppdb_paraphrase(&idx, "population", 5)[0].score, 0.8);
    assert_eq!(ppdb_paraphrase(&idx, "SIZE", 1).len(), 1);
    let eq: BTreeSet<Relation> = [Relation::Equivalence].into_iter().collect();
    let strict = ppdb_load(&fixture("ppdb_sample.txt"), 0.5, &eq).unwrap();
    let got: Vec<_> = ppdb_paraphrase(&strict, "size", 5)
        .iter()
        .map(|e| e.rhs_phrase.as_str())
        .collect();
    assert_eq!(got, ["file size", "dimensions"]);
    assert!(ppdb_paraphrase(&strict, "large", 5).is_empty());
    assert!(ppdb_paraphrase(&idx, "size", 0).is_empty());
}
