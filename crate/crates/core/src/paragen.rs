//! Candidate-paraphrase sources: precomputed JSONL files, a two-call
//! backtranslation chain over a translation service, and a PPDB 2.0 phrase index.
//!
//! Translation contract: `POST <base>/translate` with
//! `{"text": "...", "src": "en", "tgt": "fr"}`, answered by `{"text": "..."}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::text::nfc;

pub const DEFAULT_PIVOTS: [&str; 5] = ["de", "fr", "hi", "ru", "zh"];
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error)]
pub enum ParagenError {
    #[error("malformed candidate row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("translation service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("unsupported pivot language {0:?}")]
    UnsupportedPivot(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed fixture: {0}")]
    MalformedFixture(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ParagenError + '_ {
    move |source| ParagenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateProvenance {
    #[default]
    Precomputed,
    LiveService,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateParaphrase {
    pub uid: String,
    pub system: String,
    pub text: String,
    #[serde(default)]
    pub provenance: CandidateProvenance,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCandidates {
    pub candidates: Vec<CandidateParaphrase>,
    /// Uids absent from the reference corpus, in first-seen order.
    pub unknown_uids: Vec<String>,
}

impl LoadedCandidates {
    pub fn by_system(&self) -> BTreeMap<&str, Vec<&CandidateParaphrase>> {
        let mut out: BTreeMap<&str, Vec<&CandidateParaphrase>> = BTreeMap::new();
        for c in &self.candidates {
            out.entry(c.system.as_str()).or_default().push(c);
        }
        out
    }
}

pub fn parse_candidates(text: &str, corpus: Option<&Corpus>) -> Result<LoadedCandidates, ParagenError> {
    let mut out = LoadedCandidates::default();
    let mut seen_unknown = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ParagenError::MalformedRow { line: i + 1, reason };
        let c: CandidateParaphrase = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if c.system.trim().is_empty() {
            return Err(bad("empty system".into()));
        }
        if let Some(corpus) = corpus {
            if !corpus.contains(&c.uid) && seen_unknown.insert(c.uid.clone()) {
                out.unknown_uids.push(c.uid.clone());
            }
        }
        out.candidates.push(c);
    }
    Ok(out)
}

/// Load `{uid, system, text}` JSONL rows. Unknown uids are reported, not dropped.
pub fn load_candidates(path: &Path, corpus: Option<&Corpus>) -> Result<LoadedCandidates, ParagenError> {
    parse_candidates(&fs::read_to_string(path).map_err(io_err(path))?, corpus)
}

pub fn write_candidates(path: &Path, cands: &[CandidateParaphrase]) -> Result<(), ParagenError> {
    let mut s = String::new();
    for c in cands {
        s.push_str(&serde_json::to_string(c).expect("candidate serializes"));
        s.push('\n');
    }
    fs::write(path, s).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Translation

pub trait TranslationService: Send + Sync {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ParagenError>;

    /// Pivot languages this service round-trips through English.
    fn supports_pivot(&self, lang: &str) -> bool {
        DEFAULT_PIVOTS.contains(&lang)
    }
}

/// Returns every input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoService;

impl TranslationService for EchoService {
    fn translate(&self, text: &str, _src: &str, _tgt: &str) -> Result<String, ParagenError> {
        Ok(text.to_owned())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedTranslation {
    pub text: String,
    pub src: String,
    pub tgt: String,
    pub output: String,
}

/// Replays translations recorded offline; unrecorded requests fail as unavailable.
#[derive(Debug, Clone, Default)]
pub struct ReplayService {
    table: HashMap<(String, String, String), String>,
}

impl ReplayService {
    pub fn new(records: impl IntoIterator<Item = RecordedTranslation>) -> Self {
        Self {
            table: records
                .into_iter()
                .map(|r| ((nfc(&r.text), r.src, r.tgt), r.output))
                .collect(),
        }
    }

    /// JSONL of [`RecordedTranslation`].
    pub fn load(path: &Path) -> Result<Self, ParagenError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ParagenError::MalformedFixture(e.to_string())))
            .collect::<Result<Vec<RecordedTranslation>, _>>()?;
        Ok(Self::new(records))
    }

    fn pivots(&self) -> impl Iterator<Item = &str> {
        self.table
            .keys()
            .flat_map(|(_, s, t)| [s.as_str(), t.as_str()])
            .filter(|l| *l != "en")
    }
}

impl TranslationService for ReplayService {
    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ParagenError> {
        self.table
            .get(&(nfc(text), src.to_owned(), tgt.to_owned()))
            .cloned()
            .ok_or_else(|| ParagenError::ServiceUnavailable(format!("no recording for {src}->{tgt} {text:?}")))
    }

    fn supports_pivot(&self, lang: &str) -> bool {
        self.pivots().any(|p| p == lang)
    }
}

#[cfg(feature = "net")]
pub use http::HttpTranslator;

#[cfg(feature = "net")]
mod http {
    use super::*;

    #[derive(Serialize)]
    struct TranslateRequest<'a> {
        text: &'a str,
        src: &'a str,
        tgt: &'a str,
    }

    #[derive(Deserialize)]
    struct TranslateResponse {
        text: String,
    }

    /// Client for the `/translate` contract.
    pub struct HttpTranslator {
        base: String,
        pivots: Vec<String>,
        agent: ureq::Agent,
    }

    impl HttpTranslator {
        pub fn new(base_url: &str) -> Self {
            Self::with_pivots(base_url, DEFAULT_PIVOTS.iter().map(|p| p.to_string()).collect())
        }

        pub fn with_pivots(base_url: &str, pivots: Vec<String>) -> Self {
            let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
            Self {
                base: base_url.trim_end_matches('/').to_owned(),
                pivots,
                agent,
            }
        }
    }

    impl TranslationService for HttpTranslator {
        fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, ParagenError> {
            let mut resp = self
                .agent
                .post(&format!("{}/translate", self.base))
                .send_json(&TranslateRequest { text, src, tgt })
                .map_err(|e| ParagenError::ServiceUnavailable(e.to_string()))?;
            if resp.status() != 200 {
                return Err(ParagenError::ServiceUnavailable(format!("status {}", resp.status())));
            }
            let body: TranslateResponse = resp
                .body_mut()
                .read_json()
                .map_err(|e| ParagenError::ServiceUnavailable(format!("bad response: {e}")))?;
            Ok(body.text)
        }

        fn supports_pivot(&self, lang: &str) -> bool {
            self.pivots.iter().any(|p| p == lang)
        }
    }
}

/// English to `pivot` and back; the result is tagged `en-<pivot>`.
pub fn backtranslate(
    uid: &str,
    question: &str,
    pivot: &str,
    service: &dyn TranslationService,
) -> Result<CandidateParaphrase, ParagenError> {
    if pivot == "en" || !service.supports_pivot(pivot) {
        return Err(ParagenError::UnsupportedPivot(pivot.to_owned()));
    }
    let foreign = service.translate(question, "en", pivot)?;
    let back = service.translate(&foreign, pivot, "en")?;
    Ok(CandidateParaphrase {
        uid: uid.to_owned(),
        system: format!("en-{pivot}"),
        text: back,
        provenance: CandidateProvenance::LiveService,
    })
}

/// Backtranslate every question with at most `max_in_flight` concurrent chains.
/// Output order follows corpus order; the first error aborts the batch.
pub fn backtranslate_corpus(
    corpus: &Corpus,
    pivot: &str,
    service: &dyn TranslationService,
    max_in_flight: usize,
) -> Result<Vec<CandidateParaphrase>, ParagenError> {
    if !service.supports_pivot(pivot) {
        return Err(ParagenError::UnsupportedPivot(pivot.to_owned()));
    }
    let points = corpus.points();
    let slots: Vec<Mutex<Option<Result<CandidateParaphrase, ParagenError>>>> =
        points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(dp) = points.get(i) else { break };
                let r = backtranslate(&dp.uid, &dp.question, pivot, service);
                let failed = r.is_err();
                *slots[i].lock().expect("slot lock") = Some(r);
                if failed {
                    next.store(points.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(points.len());
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(r) => out.push(r?),
            None => break,
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// PPDB

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Equivalence,
    ForwardEntailment,
    ReverseEntailment,
    Exclusion,
    OtherRelated,
    Independent,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Equivalence,
        Relation::ForwardEntailment,
        Relation::ReverseEntailment,
        Relation::Exclusion,
        Relation::OtherRelated,
        Relation::Independent,
    ];
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown PPDB relation '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpdbEntry {
    /// Syntactic label, e.g. `[NN]`.
    pub label: String,
    pub lhs_phrase: String,
    pub rhs_phrase: String,
    pub relation: Relation,
    pub score: f64,
}

impl PpdbEntry {
    /// One flat-format line; the score is written as `PPDB2.0Score`.
    pub fn to_line(&self) -> String {
        format!(
            "{} ||| {} ||| {} ||| PPDB2.0Score={} ||| ||| {}",
            self.label, self.lhs_phrase, self.rhs_phrase, self.score, self.relation
        )
    }
}

/// Parse one `|||`-delimited PPDB 2.0 line.
///
/// The score is the `PPDB2.0Score` feature when present, else the first
/// numeric feature.
pub fn parse_ppdb_line(line: &str) -> Result<PpdbEntry, String> {
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let (label, lhs, rhs, features, relation) = (fields[0], fields[1], fields[2], fields[3], fields[5]);
    if lhs.is_empty() || rhs.is_empty() {
        return Err("empty phrase".into());
    }
    let pairs: Vec<(&str, &str)> = features
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let score = pairs
        .iter()
        .find(|(k, _)| *k == "PPDB2.0Score")
        .and_then(|(_, v)| v.parse::<f64>().ok())
        .or_else(|| pairs.iter().find_map(|(_, v)| v.parse::<f64>().ok()))
        .ok_or("no numeric score feature")?;
    if !score.is_finite() {
        return Err("non-finite score".into());
    }
    Ok(PpdbEntry {
        label: label.to_owned(),
        lhs_phrase: lhs.to_owned(),
        rhs_phrase: rhs.to_owned(),
        relation: relation.parse()?,
        score,
    })
}

fn phrase_key(phrase: &str) -> String {
    nfc(phrase.trim()).to_lowercase()
}

/// Phrase to paraphrase entries, each list sorted by descending score.
#[derive(Debug, Clone)]
pub struct PpdbIndex {
    entries: HashMap<String, Vec<PpdbEntry>>,
    pub min_score: f64,
    pub relations: BTreeSet<Relation>,
    /// 1-based numbers of lines that failed to parse and were skipped.
    pub malformed_lines: Vec<usize>,
}

impl PpdbIndex {
    pub fn empty(min_score: f64, relations: BTreeSet<Relation>) -> Self {
        Self {
            entries: HashMap::new(),
            min_score,
            relations,
            malformed_lines: Vec::new(),
        }
    }

    pub fn parse(text: &str, min_score: f64, relations: &BTreeSet<Relation>) -> Self {
        let mut idx = Self::empty(min_score, relations.clone());
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match parse_ppdb_line(line) {
                Ok(e) if e.score >= min_score && relations.contains(&e.relation) => {
                    idx.entries.entry(phrase_key(&e.lhs_phrase)).or_default().push(e);
                }
                Ok(_) => {}
                Err(_) => idx.malformed_lines.push(i + 1),
            }
        }
        for list in idx.entries.values_mut() {
            list.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then_with(|| a.rhs_phrase.cmp(&b.rhs_phrase))
                    .then_with(|| a.label.cmp(&b.label))
            });
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, phrase: &str) -> &[PpdbEntry] {
        self.entries.get(&phrase_key(phrase)).map_or(&[], Vec::as_slice)
    }

    /// Flat-format dump, phrases in sorted order.
    pub fn to_flat_string(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            for e in &self.entries[k] {
                out.push_str(&e.to_line());
                out.push('\n');
            }
        }
        out
    }
}

/// Load a PPDB flat file keeping entries with `score >= min_score` and an allowed relation.
/// Malformed lines are skipped and listed in [`PpdbIndex::malformed_lines`].
pub fn ppdb_load(path: &Path, min_score: f64, relations: &BTreeSet<Relation>) -> Result<PpdbIndex, ParagenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(PpdbIndex::parse(&text, min_score, relations))
}

/// Top-`k` entries for a phrase, highest score first.
pub fn ppdb_paraphrase<'a>(index: &'a PpdbIndex, phrase: &str, k: usize) -> &'a [PpdbEntry] {
    let all = index.lookup(phrase);
    &all[..k.min(all.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
[NN] ||| size ||| file size ||| PPDB2.0Score=0.9 AGigaSim=0.5 ||| 0-0 ||| Equivalence
[NN] ||| size ||| dimensions ||| PPDB2.0Score=0.7 ||| 0-0 ||| Equivalence
[NN] ||| size ||| magnitude ||| PPDB2.0Score=0.2 ||| 0-0 ||| ForwardEntailment
[NN] ||| population ||| inhabitants ||| AGigaSim=0.8 ||| 0-0 ||| Equivalence
[JJ] ||| large ||| small ||| PPDB2.0Score=0.3 ||| 0-0 ||| Exclusion
";

    fn all() -> BTreeSet<Relation> {
        Relation::ALL.into_iter().collect()
    }

    #[test]
    fn min_score_filter() {
        let idx = PpdbIndex::parse(FIXTURE, 0.5, &all());
        assert_eq!(idx.len(), 3);
        assert!(idx.malformed_lines.is_empty());
        // fallback to the first numeric feature
        assert_eq!(idx.lookup("population")[0].score, 0.8);
    }

    #[test]
    fn relation_filter() {
        let eq: BTreeSet<_> = [Relation::Equivalence].into();
        let idx = PpdbIndex::parse(FIXTURE, f64::NEG_INFINITY, &eq);
        assert_eq!(idx.len(), 3);
        assert!(idx.lookup("large").is_empty());
    }

    #[test]
    fn empty_and_malformed() {
        assert!(PpdbIndex::parse("", 0.0, &all()).is_empty());
        let idx = PpdbIndex::parse("junk\n[X] ||| a ||| b ||| nope ||| ||| Equivalence\n", 0.0, &all());
        assert_eq!(idx.malformed_lines, vec![1, 2]);
    }

    #[test]
    fn top_k() {
        let idx = PpdbIndex::parse(FIXTURE, 0.0, &all());
        let top: Vec<_> = ppdb_paraphrase(&idx, "Size", 1).iter().map(|e| &e.rhs_phrase).collect();
        assert_eq!(top, ["file size"]);
        assert_eq!(ppdb_paraphrase(&idx, "size", 10).len(), 3);
        assert!(ppdb_paraphrase(&idx, "absent", 3).is_empty());
    }

    #[test]
    fn candidates() {
        assert!(parse_candidates("", None).unwrap().candidates.is_empty());
        let rows = "{\"uid\": \"a\", \"text\": \"t\"}\n";
        assert!(matches!(
            parse_candidates(rows, None),
            Err(ParagenError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn echo_backtranslation() {
        let c = backtranslate("u1", "Who wrote Hamlet?", "fr", &EchoService).unwrap();
        assert_eq!(c.text, "Who wrote Hamlet?");
        assert_eq!(c.system, "en-fr");
        assert_eq!(c.provenance, CandidateProvenance::LiveService);
        assert!(matches!(
            backtranslate("u1", "q", "xx", &EchoService),
            Err(ParagenError::UnsupportedPivot(p)) if p == "xx"
        ));
    }
}
