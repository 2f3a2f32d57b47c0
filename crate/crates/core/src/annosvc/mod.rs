//! Labeling sessions backed by one append-only JSONL journal per session.
//!
//! Every state change is written and synced to the journal before it is
//! acknowledged, and opening a [`Store`] replays all journals. A torn final
//! line (a crash mid-write) is dropped and truncated away on replay.

#[cfg(feature = "net")]
mod http;

#[cfg(feature = "net")]
pub use http::{router, serve};

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum AnnoError {
    #[error("a session needs at least one item")]
    EmptyItems,
    #[error("uid {0:?} is not in the corpus")]
    UnknownUid(String),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("duplicate item {0:?}")]
    DuplicateItem(String),
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("no item {0:?} in this session")]
    UnknownItem(String),
    #[error("label {label:?} is not valid for {task} sessions")]
    InvalidLabel { label: String, task: Task },
    #[error("item {0:?} is already labeled; resubmit with overwrite")]
    AlreadyLabeled(String),
    #[error("session belongs to annotator {expected:?}, not {got:?}")]
    AnnotatorMismatch { expected: String, got: String },
    #[error("corrupt journal {path} at line {line}: {reason}")]
    CorruptJournal { path: PathBuf, line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl AnnoError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            AnnoError::EmptyItems => "EmptyItems",
            AnnoError::UnknownUid(_) => "UnknownUid",
            AnnoError::InvalidItem(_) => "InvalidItem",
            AnnoError::DuplicateItem(_) => "DuplicateItem",
            AnnoError::UnknownSession(_) => "UnknownSession",
            AnnoError::UnknownItem(_) => "UnknownItem",
            AnnoError::InvalidLabel { .. } => "InvalidLabel",
            AnnoError::AlreadyLabeled(_) => "AlreadyLabeled",
            AnnoError::AnnotatorMismatch { .. } => "AnnotatorMismatch",
            AnnoError::CorruptJournal { .. } => "CorruptJournal",
            AnnoError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Adequacy,
    DatasetError,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Adequacy => "adequacy",
            Task::DatasetError => "dataset_error",
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Task::Adequacy => &["adequate", "inadequate", "trivial"],
            Task::DatasetError => &["no_error", "question", "paraphrase", "both"],
        }
    }

    /// Canonical label, accepting any case and `-`/space for `_`.
    pub fn normalize_label(self, label: &str) -> Result<&'static str, AnnoError> {
        let key: String = label
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        let key = if key == "noerror" { "no_error".to_owned() } else { key };
        self.labels()
            .iter()
            .find(|l| **l == key)
            .copied()
            .ok_or_else(|| AnnoError::InvalidLabel {
                label: label.to_owned(),
                task: self,
            })
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "adequacy" => Ok(Task::Adequacy),
            "dataset_error" | "error" => Ok(Task::DatasetError),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Item as submitted when creating a session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemSpec {
    pub uid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase: Option<String>,
}

/// Item as stored and served. Adequacy items are keyed `uid/system`,
/// dataset-error items by uid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionItem {
    pub item_id: String,
    pub uid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub session_id: String,
    pub item_id: String,
    pub uid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub label: String,
    pub annotator: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        session_id: String,
        task: Task,
        items: Vec<SessionItem>,
        created_at: String,
    },
    Label {
        item_id: String,
        label: String,
        annotator: String,
        timestamp: String,
        overwrite: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Complete,
}

/// Full observable state of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub task: Task,
    pub created_at: String,
    pub items: Vec<SessionItem>,
    pub labels: Vec<Option<LabelRecord>>,
    pub annotator: Option<String>,
    pub cursor: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub index: usize,
    pub total: usize,
    #[serde(flatten)]
    pub item: SessionItem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Next {
    Item(NextItem),
    Done,
}

struct Session {
    state: SessionState,
    index: HashMap<String, usize>,
    journal: File,
}

impl Session {
    fn from_created(
        session_id: String,
        task: Task,
        items: Vec<SessionItem>,
        created_at: String,
        journal: File,
    ) -> Self {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        let labels = vec![None; items.len()];
        let mut s = Session {
            state: SessionState {
                session_id,
                task,
                created_at,
                items,
                labels,
                annotator: None,
                cursor: 0,
                status: SessionStatus::Open,
            },
            index,
            journal,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let st = &mut self.state;
        st.cursor = st.labels.iter().position(Option::is_none).unwrap_or(st.labels.len());
        st.status = if st.cursor == st.labels.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        };
    }

    /// Check a label event against current state; returns the item index and canonical label.
    fn check(
        &self,
        item_id: &str,
        label: &str,
        annotator: &str,
        overwrite: bool,
    ) -> Result<(usize, &'static str), AnnoError> {
        let i = *self
            .index
            .get(item_id)
            .ok_or_else(|| AnnoError::UnknownItem(item_id.to_owned()))?;
        let label = self.state.task.normalize_label(label)?;
        if let Some(expected) = &self.state.annotator {
            if expected != annotator {
                return Err(AnnoError::AnnotatorMismatch {
                    expected: expected.clone(),
                    got: annotator.to_owned(),
                });
            }
        }
        if self.state.labels[i].is_some() && !overwrite {
            return Err(AnnoError::AlreadyLabeled(item_id.to_owned()));
        }
        Ok((i, label))
    }

    fn apply(&mut self, i: usize, label: &str, annotator: &str, timestamp: &str) {
        let item = &self.state.items[i];
        self.state.labels[i] = Some(LabelRecord {
            session_id: self.state.session_id.clone(),
            item_id: item.item_id.clone(),
            uid: item.uid.clone(),
            system: item.system.clone(),
            label: label.to_owned(),
            annotator: annotator.to_owned(),
            timestamp: timestamp.to_owned(),
        });
        self.state.annotator.get_or_insert_with(|| annotator.to_owned());
        self.refresh();
    }
}

fn append_synced(file: &mut File, event: &Event) -> io::Result<()> {
    let mut line = serde_json::to_string(event).expect("event serializes");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    #[cfg(not(unix))]
    let _ = dir;
    Ok(())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// All sessions under one data directory.
pub struct Store {
    dir: PathBuf,
    corpus: Option<Arc<Corpus>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
}

impl Store {
    /// Open (creating if needed) a data directory and replay its journals.
    /// With a corpus, item uids are checked and missing texts filled in.
    pub fn open(dir: &Path, corpus: Option<Arc<Corpus>>) -> Result<Self, AnnoError> {
        fs::create_dir_all(dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            if let Some(s) = replay(&path)? {
                sessions.insert(s.state.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            corpus,
            sessions: RwLock::new(sessions),
            counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, AnnoError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| AnnoError::UnknownSession(id.to_owned()))
    }

    fn build_items(&self, task: Task, specs: Vec<ItemSpec>) -> Result<Vec<SessionItem>, AnnoError> {
        if specs.is_empty() {
            return Err(AnnoError::EmptyItems);
        }
        let mut seen = std::collections::HashSet::new();
        let mut items = Vec::with_capacity(specs.len());
        for mut spec in specs {
            if spec.uid.is_empty() {
                return Err(AnnoError::InvalidItem("empty uid".into()));
            }
            if let Some(corpus) = &self.corpus {
                let point = corpus
                    .get(&spec.uid)
                    .ok_or_else(|| AnnoError::UnknownUid(spec.uid.clone()))?;
                spec.question.get_or_insert_with(|| point.question.clone());
                if task == Task::DatasetError {
                    spec.paraphrase.get_or_insert_with(|| point.paraphrase.clone());
                }
            }
            let item_id = match task {
                Task::Adequacy => {
                    let system = spec.system.as_deref().filter(|s| !s.is_empty()).ok_or_else(|| {
                        AnnoError::InvalidItem(format!("adequacy item {:?} needs a system", spec.uid))
                    })?;
                    if spec.candidate.is_none() {
                        return Err(AnnoError::InvalidItem(format!(
                            "adequacy item {:?} needs a candidate",
                            spec.uid
                        )));
                    }
                    format!("{}/{}", spec.uid, system)
                }
                Task::DatasetError => spec.uid.clone(),
            };
            if !seen.insert(item_id.clone()) {
                return Err(AnnoError::DuplicateItem(item_id));
            }
            items.push(SessionItem {
                item_id,
                uid: spec.uid,
                system: spec.system,
                candidate: spec.candidate,
                question: spec.question,
                paraphrase: spec.paraphrase,
            });
        }
        Ok(items)
    }

    pub fn create_session(&self, task: Task, specs: Vec<ItemSpec>) -> Result<String, AnnoError> {
        let items = self.build_items(task, specs)?;
        let millis = Utc::now().timestamp_millis();
        let (id, file) = loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let id = format!("s{millis:x}{n:04x}");
            let path = self.dir.join(format!("{id}.jsonl"));
            match OpenOptions::new().append(true).create_new(true).open(&path) {
                Ok(f) => break (id, f),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        };
        let created_at = now();
        let mut file = file;
        let event = Event::Created {
            session_id: id.clone(),
            task,
            items: items.clone(),
            created_at: created_at.clone(),
        };
        append_synced(&mut file, &event)?;
        sync_dir(&self.dir)?;
        let session = Session::from_created(id.clone(), task, items, created_at, file);
        self.sessions
            .write()
            .unwrap()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn next_item(&self, id: &str) -> Result<Next, AnnoError> {
        let s = self.session(id)?;
        let s = s.lock().unwrap();
        let st = &s.state;
        Ok(match st.items.get(st.cursor) {
            Some(item) => Next::Item(NextItem {
                index: st.cursor,
                total: st.items.len(),
                item: item.clone(),
            }),
            None => Next::Done,
        })
    }

    /// Journal the label, then apply it. Returns once the record is on disk.
    pub fn submit_label(
        &self,
        id: &str,
        item_id: &str,
        label: &str,
        annotator: &str,
        overwrite: bool,
    ) -> Result<LabelRecord, AnnoError> {
        if annotator.trim().is_empty() {
            return Err(AnnoError::InvalidItem("annotator id is required".into()));
        }
        let s = self.session(id)?;
        let mut s = s.lock().unwrap();
        let (i, label) = s.check(item_id, label, annotator, overwrite)?;
        let timestamp = now();
        let event = Event::Label {
            item_id: item_id.to_owned(),
            label: label.to_owned(),
            annotator: annotator.to_owned(),
            timestamp: timestamp.clone(),
            overwrite,
        };
        append_synced(&mut s.journal, &event)?;
        s.apply(i, label, annotator, &timestamp);
        Ok(s.state.labels[i].clone().expect("just applied"))
    }

    /// Final label per labeled item, in item order.
    pub fn export(&self, id: &str) -> Result<Vec<LabelRecord>, AnnoError> {
        let s = self.session(id)?;
        let s = s.lock().unwrap();
        Ok(s.state.labels.iter().flatten().cloned().collect())
    }

    pub fn export_jsonl(&self, id: &str) -> Result<String, AnnoError> {
        Ok(self
            .export(id)?
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect())
    }

    pub fn state(&self, id: &str) -> Result<SessionState, AnnoError> {
        Ok(self.session(id)?.lock().unwrap().state.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// Rebuild a session from its journal. An empty file yields None.
fn replay(path: &Path) -> Result<Option<Session>, AnnoError> {
    let bytes = fs::read(path)?;
    let corrupt = |line: usize, reason: String| AnnoError::CorruptJournal {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut events = Vec::new();
    let mut good_len = 0usize;
    let mut offset = 0usize;
    let mut lineno = 0usize;
    while offset < bytes.len() {
        lineno += 1;
        let end = bytes[offset..].iter().position(|b| *b == b'\n').map(|p| offset + p);
        let raw = &bytes[offset..end.unwrap_or(bytes.len())];
        let parsed = std::str::from_utf8(raw)
            .map_err(|e| e.to_string())
            .and_then(|l| serde_json::from_str::<Event>(l).map_err(|e| e.to_string()));
        match (parsed, end) {
            (Ok(ev), Some(e)) => {
                events.push(ev);
                offset = e + 1;
                good_len = offset;
            }
            // an unterminated last line is a torn write, never acknowledged
            (_, None) => break,
            (Err(reason), Some(_)) => return Err(corrupt(lineno, reason)),
        }
    }
    if good_len < bytes.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(good_len as u64)?;
        f.sync_all()?;
    }
    let mut events = events.into_iter();
    let Some(first) = events.next() else {
        return Ok(None);
    };
    let Event::Created {
        session_id,
        task,
        items,
        created_at,
    } = first
    else {
        return Err(corrupt(1, "journal does not start with a created event".into()));
    };
    let journal = OpenOptions::new().append(true).open(path)?;
    let mut session = Session::from_created(session_id, task, items, created_at, journal);
    for (n, ev) in events.enumerate() {
        match ev {
            Event::Label {
                item_id,
                label,
                annotator,
                timestamp,
                overwrite,
            } => {
                let (i, label) = session
                    .check(&item_id, &label, &annotator, overwrite)
                    .map_err(|e| corrupt(n + 2, e.to_string()))?;
                session.apply(i, label, &annotator, &timestamp);
            }
            Event::Created { .. } => return Err(corrupt(n + 2, "second created event".into())),
        }
    }
    Ok(Some(session))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<ItemSpec> {
        (0..n)
            .map(|i| ItemSpec {
                uid: format!("u{i}"),
                system: Some("en-fr".into()),
                candidate: Some(format!("candidate {i}")),
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn labels_and_export() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), None).unwrap();
        let id = store.create_session(Task::Adequacy, items(3)).unwrap();
        let Next::Item(first) = store.next_item(&id).unwrap() else {
            panic!()
        };
        assert_eq!((first.index, first.item.item_id.as_str()), (0, "u0/en-fr"));
        store.submit_label(&id, "u0/en-fr", "Adequate", "ann", false).unwrap();
        let Next::Item(second) = store.next_item(&id).unwrap() else {
            panic!()
        };
        assert_eq!(second.index, 1);
        assert!(matches!(
            store.submit_label(&id, "u0/en-fr", "trivial", "ann", false),
            Err(AnnoError::AlreadyLabeled(_))
        ));
        assert!(matches!(
            store.submit_label(&id, "u1/en-fr", "Maybe", "ann", false),
            Err(AnnoError::InvalidLabel { .. })
        ));
        assert!(matches!(
            store.submit_label(&id, "u9/en-fr", "trivial", "ann", false),
            Err(AnnoError::UnknownItem(_))
        ));
        assert!(matches!(
            store.submit_label(&id, "u1/en-fr", "trivial", "other", false),
            Err(AnnoError::AnnotatorMismatch { .. })
        ));
        store.submit_label(&id, "u0/en-fr", "trivial", "ann", true).unwrap();
        let out = store.export(&id).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, "trivial");
        store.submit_label(&id, "u2/en-fr", "inadequate", "ann", false).unwrap();
        store.submit_label(&id, "u1/en-fr", "adequate", "ann", false).unwrap();
        assert_eq!(store.next_item(&id).unwrap(), Next::Done);
        let uids: Vec<_> = store.export(&id).unwrap().into_iter().map(|r| r.uid).collect();
        assert_eq!(uids, ["u0", "u1", "u2"]);
    }

    #[test]
    fn create_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), None).unwrap();
        assert!(matches!(
            store.create_session(Task::Adequacy, vec![]),
            Err(AnnoError::EmptyItems)
        ));
        let mut dup = items(2);
        dup[1].uid = "u0".into();
        assert!(matches!(
            store.create_session(Task::Adequacy, dup),
            Err(AnnoError::DuplicateItem(_))
        ));
        assert!(matches!(store.next_item("nope"), Err(AnnoError::UnknownSession(_))));
        let corpus = Arc::new(Corpus::from_points(vec![crate::corpus::DataPoint::new("u0", "q", "p")]).unwrap());
        let store = Store::open(dir.path(), Some(corpus)).unwrap();
        assert!(matches!(
            store.create_session(Task::Adequacy, items(2)),
            Err(AnnoError::UnknownUid(_))
        ));
        let id = store
            .create_session(
                Task::DatasetError,
                vec![ItemSpec {
                    uid: "u0".into(),
                    ..Default::default()
                }],
            )
            .unwrap();
        let Next::Item(it) = store.next_item(&id).unwrap() else {
            panic!()
        };
        assert_eq!(it.item.paraphrase.as_deref(), Some("p"));
        store.submit_label(&id, "u0", "No Error", "ann", false).unwrap();
        assert_eq!(store.export(&id).unwrap()[0].label, "no_error");
    }

    #[test]
    fn replay_restores_state_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let (id, before) = {
            let store = Store::open(dir.path(), None).unwrap();
            let id = store.create_session(Task::Adequacy, items(4)).unwrap();
            store.submit_label(&id, "u0/en-fr", "adequate", "ann", false).unwrap();
            store.submit_label(&id, "u1/en-fr", "trivial", "ann", false).unwrap();
            store.submit_label(&id, "u0/en-fr", "inadequate", "ann", true).unwrap();
            (id.clone(), store.state(&id).unwrap())
        };
        let path = dir.path().join(format!("{id}.jsonl"));
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"event":"label","item_id":"u2/en"#).unwrap();
        drop(f);
        let store = Store::open(dir.path(), None).unwrap();
        assert_eq!(store.state(&id).unwrap(), before);
        store.submit_label(&id, "u2/en-fr", "adequate", "ann", false).unwrap();
        let again = Store::open(dir.path(), None).unwrap();
        assert_eq!(again.state(&id).unwrap(), store.state(&id).unwrap());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), None).unwrap();
        let id = store.create_session(Task::Adequacy, items(1)).unwrap();
        drop(store);
        let path = dir.path().join(format!("{id}.jsonl"));
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"garbage\n").unwrap();
        drop(f);
        assert!(matches!(
            Store::open(dir.path(), None),
            Err(AnnoError::CorruptJournal { .. })
        ));
    }
}
