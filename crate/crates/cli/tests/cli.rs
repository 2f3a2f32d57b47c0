use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn paraqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paraqa")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_writes_report_and_filtered_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let filtered = dir.path().join("filtered.jsonl");
    let corpus = fixture("planted_corpus.json");
    let text = stdout(&paraqa(&[
        "scan",
        path(&corpus),
        "--report",
        path(&report),
        "--filtered",
        path(&filtered),
    ]));
    assert!(text.lines().last().unwrap().ends_with("10.0"), "{text}");
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["rejected_percent"], 10.0);
    assert_eq!(rep["corpus_size"], 60);
    assert_eq!(std::fs::read_to_string(&filtered).unwrap().lines().count(), 54);
    let again = stdout(&paraqa(&["scan", path(&filtered)]));
    assert!(again.lines().last().unwrap().ends_with("0.0"), "{again}");
}

#[test]
fn corpus_load_and_sample() {
    let corpus = fixture("planted_corpus.json");
    let out = paraqa(&["corpus", "load", path(&corpus), "--stats"]);
    let jsonl = stdout(&out);
    assert_eq!(jsonl.lines().count(), 60);
    let stats = String::from_utf8(out.stderr).unwrap();
    assert!(stats.starts_with("60 items"), "{stats}");
    let first: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["uid"], "fx-001");

    let sampled = stdout(&paraqa(&[
        "corpus",
        "sample",
        path(&corpus),
        "--type",
        "SingleFact",
        "-n",
        "5",
        "--seed",
        "42",
    ]));
    let uids: Vec<String> = sampled
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["uid"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    let golden: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(fixture("sample_singlefact_n5_seed42.json")).unwrap()).unwrap();
    assert_eq!(uids, golden);
}

#[test]
fn parse_and_recover() {
    let ok = stdout(&paraqa(&["parse", "What will the population of France be in 2028?"]));
    assert_eq!(
        ok,
        "{\"s\":\"France\",\"p\":\"population\",\"o\":\"?y0\",\"t\":2028,\"h\":\"value\",\"v\":\"?y0\"}\n"
    );
    let bad = paraqa(&["parse", "How many people will be living in France in 2028?"]);
    assert!(!bad.status.success());
    assert_eq!(String::from_utf8(bad.stdout).unwrap(), "{\"reason\":\"NoTemplate\"}\n");

    let identity = stdout(&paraqa(&["recover"]));
    assert_eq!(
        identity,
        std::fs::read_to_string(fixture("recovery_identity_report.txt")).unwrap()
    );
    let dir = tempfile::tempdir().unwrap();
    let json_out = dir.path().join("oracle.json");
    let oracle = stdout(&paraqa(&[
        "recover",
        "--paraphraser",
        "oracle",
        "--out",
        path(&json_out),
    ]));
    assert!(oracle.ends_with("recovered 20/20 (100.0%)\n"));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(json_out).unwrap()).unwrap();
    assert_eq!((rep["recovered"].as_u64(), rep["total"].as_u64()), (Some(20), Some(20)));
    assert!(!paraqa(&["recover", "--paraphraser", "carrier-pigeon"]).status.success());
}

#[test]
fn score_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.jsonl");
    let corpus = fixture("planted_corpus.json");
    let candidates = fixture("candidates.jsonl");
    stdout(&paraqa(&[
        "score",
        "--corpus",
        path(&corpus),
        "--candidates",
        path(&candidates),
        "--alpha",
        "0.7",
        "--out",
        path(&rows),
    ]));
    let text = std::fs::read_to_string(&rows).unwrap();
    assert_eq!(text.lines().count(), 6);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let (cr, cs, ib) = (
            v["bleu_cr"].as_f64().unwrap(),
            v["bleu_cs"].as_f64().unwrap(),
            v["ibleu"].as_f64().unwrap(),
        );
        assert!((ib - (0.7 * cr - 0.3 * cs)).abs() < 1e-12);
    }
    assert!(!paraqa(&[
        "score",
        "--corpus",
        path(&corpus),
        "--candidates",
        path(&candidates),
        "--alpha",
        "2"
    ])
    .status
    .success());

    let csv = dir.path().join("t3.csv");
    let agg = fixture("aggregation_rows.jsonl");
    stdout(&paraqa(&[
        "report",
        "table3",
        "--corpus",
        path(&corpus),
        "--rows",
        path(&agg),
        "--out",
        path(&csv),
    ]));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 13);

    let fig4 = dir.path().join("fig4.json");
    let (clean, error) = (fixture("effect_clean.jsonl"), fixture("effect_error.jsonl"));
    stdout(&paraqa(&[
        "report",
        "fig4",
        "--clean",
        path(&clean),
        "--error",
        path(&error),
        "--out",
        path(&fig4),
    ]));
    let effect: Value = serde_json::from_str(&std::fs::read_to_string(&fig4).unwrap()).unwrap();
    assert!(effect["error"]["inadequate"].as_f64() > effect["clean"]["inadequate"].as_f64());

    let fig1 = stdout(&paraqa(&[
        "report",
        "fig1",
        "--rows",
        path(&fixture("adequacy_rows.jsonl")),
        "--labels",
        path(&fixture("adequacy_mixed.jsonl")),
    ]));
    assert!(fig1.lines().count() >= 3, "{fig1}");
}

#[test]
fn ppdb_query() {
    let out = stdout(&paraqa(&[
        "ppdb",
        "query",
        path(&fixture("ppdb_sample.txt")),
        "size",
        "-k",
        "2",
    ]));
    let rhs: Vec<&str> = out.lines().map(|l| l.split(" ||| ").nth(2).unwrap()).collect();
    assert_eq!(rhs, ["file size", "dimensions"]);
}

struct Server {
    child: std::process::Child,
    base: String,
}

impl Server {
    fn start(data: &std::path::Path) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_paraqa"))
            .args(["annotate", "serve", "--port", "0", "--data", path(data)])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line.trim().strip_prefix("listening on ").unwrap().to_owned();
        Server { child, base }
    }

    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

fn call(method: &str, url: &str, body: Option<Value>) -> (u16, String) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut r = match body {
        Some(b) if method == "POST" => agent.post(url).send_json(&b).unwrap(),
        _ => agent.get(url).call().unwrap(),
    };
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

#[test]
fn annotation_survives_kill() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());
    let items: Vec<Value> = (0..10)
        .map(|i| json!({"uid": format!("u{i}"), "system": "en-ru", "candidate": "c"}))
        .collect();
    let (_, created) = call(
        "POST",
        &format!("{}/sessions", server.base),
        Some(json!({"task": "adequacy", "items": items})),
    );
    let id = serde_json::from_str::<Value>(&created).unwrap()["session_id"]
        .as_str()
        .unwrap()
        .to_owned();
    let labels = [
        "trivial",
        "adequate",
        "inadequate",
        "adequate",
        "adequate",
        "trivial",
        "inadequate",
        "adequate",
        "adequate",
        "trivial",
    ];
    // six labels, kill, then the remaining four on a restarted server
    for (i, l) in labels.iter().enumerate().take(6) {
        let body = json!({"item_id": format!("u{i}/en-ru"), "label": l, "annotator": "x", "overwrite": false});
        assert_eq!(
            call("POST", &format!("{}/sessions/{id}/labels", server.base), Some(body)),
            (200, r#"{"ok":true}"#.into())
        );
    }
    let (_, state_before) = call("GET", &format!("{}/sessions/{id}", server.base), None);
    server.kill();

    let server = Server::start(dir.path());
    let (_, state_after) = call("GET", &format!("{}/sessions/{id}", server.base), None);
    assert_eq!(state_before, state_after);
    let (_, next) = call("GET", &format!("{}/sessions/{id}/next", server.base), None);
    assert_eq!(serde_json::from_str::<Value>(&next).unwrap()["item_id"], "u6/en-ru");
    for (i, l) in labels.iter().enumerate().skip(6) {
        let body = json!({"item_id": format!("u{i}/en-ru"), "label": l, "annotator": "x"});
        assert_eq!(
            call("POST", &format!("{}/sessions/{id}/labels", server.base), Some(body)).0,
            200
        );
    }
    let (_, export) = call("GET", &format!("{}/sessions/{id}/export", server.base), None);
    server.kill();
    let got: Vec<String> = export
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["label"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(got, labels);
}
