//! Template-based question parser.
//!
//! A template file is a sequence of blocks separated by blank lines. The first
//! line of a block is the question pattern with `<slot>` markers; the rest are
//! `key = value` lines: `id`, `type`, and the alist skeleton keys `s p o t h v`.
//! Skeleton values are a slot reference `<name>`, a variable `?name`, a
//! number, or a literal (optionally double-quoted). Lines starting with `#`
//! are comments.
//!
//! Matching is token-based and case-insensitive on literals. A slot takes one
//! or more tokens, shortest first, and never swallows `? ! , ;`. Trailing
//! `?`/`.`/`!` are optional on both sides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Alist, AlistValue, Attr};
use crate::corpus::QuestionType;
use crate::text::{nfc, split_spans, split_tokens};

pub const BUNDLED_TEMPLATES: &str = include_str!("../../data/templates.txt");

const SLOT_STOP: [&str; 4] = ["?", "!", ",", ";"];
const TERMINAL: [&str; 3] = ["?", ".", "!"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("malformed template {id}: {reason}")]
    MalformedTemplate { id: String, reason: String },
    #[error("ambiguous templates: {}", .0.join(", "))]
    AmbiguousTemplates(Vec<String>),
    #[error("alist does not unify with template {id}: {reason}")]
    UnificationFailure { id: String, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Parse failure reported as a value; parsing never faults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail")]
pub enum ParseError {
    NoTemplate,
    BadTime(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::NoTemplate => f.write_str("no template matches"),
            ParseError::BadTime(t) => write!(f, "time slot is not a year: {t:?}"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum SkeletonValue {
    Slot(String),
    Const(AlistValue),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    /// Lowercased NFC token.
    Word(String),
    Slot(String),
}

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub qtype: QuestionType,
    pub pattern: String,
    pub skeleton: BTreeMap<Attr, SkeletonValue>,
    pieces: Vec<Piece>,
}

fn slot_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<([a-z_][a-z0-9_]*)>").unwrap())
}

fn fold(token: &str) -> String {
    nfc(token).to_lowercase()
}

fn strip_terminal<T, F: Fn(&T) -> bool>(mut v: Vec<T>, is_terminal: F) -> Vec<T> {
    while v.last().is_some_and(&is_terminal) {
        v.pop();
    }
    v
}

/// Split a pattern into words and slots. Slots are swapped for placeholder
/// words before tokenizing so `<s>'s` splits like `France's`.
fn pattern_pieces(pattern: &str) -> Result<Vec<Piece>, String> {
    let mut names = Vec::new();
    let replaced = slot_re().replace_all(pattern, |c: &regex::Captures| {
        names.push(c[1].to_owned());
        format!(" zzslot{}zz ", names.len() - 1)
    });
    // a slot glued to a following clitic keeps its clitic
    let replaced = replaced.replace("zz '", "zz'").replace("zz \u{2019}", "zz\u{2019}");
    let mut pieces = Vec::new();
    for tok in split_tokens(&replaced) {
        if let Some(i) = tok
            .strip_prefix("zzslot")
            .and_then(|r| r.strip_suffix("zz"))
            .and_then(|n| n.parse::<usize>().ok())
        {
            pieces.push(Piece::Slot(names[i].clone()));
        } else if tok.contains('<') || tok.contains('>') {
            return Err(format!("stray angle bracket in pattern near {tok:?}"));
        } else {
            pieces.push(Piece::Word(fold(tok)));
        }
    }
    Ok(pieces)
}

fn parse_skeleton_value(raw: &str) -> Result<SkeletonValue, String> {
    let raw = raw.trim();
    if let Some(c) = slot_re().captures(raw) {
        if c.get(0).unwrap().as_str() == raw {
            return Ok(SkeletonValue::Slot(c[1].to_owned()));
        }
    }
    if raw.starts_with('?') {
        return AlistValue::var(raw)
            .map(SkeletonValue::Const)
            .map_err(|e| e.to_string());
    }
    if let Some(q) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Ok(SkeletonValue::Const(AlistValue::Literal(q.to_owned())));
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(SkeletonValue::Const(AlistValue::Int(i)));
    }
    if let Ok(r) = raw.parse::<f64>() {
        if r.is_finite() {
            return Ok(SkeletonValue::Const(AlistValue::Real(r)));
        }
    }
    if raw.is_empty() {
        return Err("empty value".into());
    }
    Ok(SkeletonValue::Const(AlistValue::Literal(raw.to_owned())))
}

impl Template {
    fn from_block(lines: &[&str], ordinal: usize) -> Result<Self, TemplateError> {
        let mut id = format!("t{ordinal}");
        let malformed = |id: &str, reason: String| TemplateError::MalformedTemplate {
            id: id.to_owned(),
            reason,
        };
        let pattern = lines[0].trim().to_owned();
        let mut qtype = None;
        let mut skeleton = BTreeMap::new();
        for line in &lines[1..] {
            let Some((k, v)) = line.split_once('=') else {
                return Err(malformed(&id, format!("expected `key = value`, got {line:?}")));
            };
            let (k, v) = (k.trim(), v.trim());
            match k {
                "id" => id = v.to_owned(),
                "type" => qtype = Some(v.parse::<QuestionType>().map_err(|e| malformed(&id, e))?),
                _ => {
                    let attr: Attr = k
                        .parse()
                        .map_err(|e: super::AlistError| malformed(&id, e.to_string()))?;
                    let value = parse_skeleton_value(v).map_err(|e| malformed(&id, e))?;
                    if skeleton.insert(attr, value).is_some() {
                        return Err(malformed(&id, format!("duplicate key {k}")));
                    }
                }
            }
        }
        let qtype = qtype.ok_or_else(|| malformed(&id, "missing `type`".into()))?;
        let pieces = pattern_pieces(&pattern).map_err(|e| malformed(&id, e))?;
        let t = Template {
            id,
            qtype,
            pattern,
            skeleton,
            pieces,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), TemplateError> {
        let bad = |reason: String| TemplateError::MalformedTemplate {
            id: self.id.clone(),
            reason,
        };
        if self.pieces.is_empty() {
            return Err(bad("empty pattern".into()));
        }
        let mut pattern_slots = BTreeSet::new();
        for w in self.pieces.windows(2) {
            if matches!(w, [Piece::Slot(_), Piece::Slot(_)]) {
                return Err(bad("adjacent slots need a separating word".into()));
            }
        }
        for p in &self.pieces {
            if let Piece::Slot(s) = p {
                if !pattern_slots.insert(s.clone()) {
                    return Err(bad(format!("slot <{s}> repeated in pattern")));
                }
            }
        }
        let skeleton_slots: BTreeSet<String> = self
            .skeleton
            .values()
            .filter_map(|v| match v {
                SkeletonValue::Slot(s) => Some(s.clone()),
                _ => None,
            })
            .collect();
        if skeleton_slots != pattern_slots {
            return Err(bad(format!(
                "pattern slots {pattern_slots:?} and skeleton slots {skeleton_slots:?} differ"
            )));
        }
        match self.skeleton.get(&Attr::H) {
            Some(SkeletonValue::Const(AlistValue::Literal(op))) if super::OPERATIONS.contains(&op.as_str()) => {}
            _ => return Err(bad("`h` must be a known operation constant".into())),
        }
        if matches!(self.skeleton.get(&Attr::T), Some(SkeletonValue::Const(_))) {
            return Err(bad("`t` must be a slot".into()));
        }
        // a probe instantiation must itself build a valid alist
        self.instantiate(&self.probe_bindings())
            .map_err(|e| bad(format!("skeleton does not form a valid alist: {e}")))?;
        Ok(())
    }

    fn slot_attr(&self, slot: &str) -> Option<Attr> {
        self.skeleton
            .iter()
            .find(|(_, v)| matches!(v, SkeletonValue::Slot(s) if s == slot))
            .map(|(a, _)| *a)
    }

    fn probe_bindings(&self) -> BTreeMap<String, String> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s.clone()),
                Piece::Word(_) => None,
            })
            .map(|s| {
                let v = if self.slot_attr(&s) == Some(Attr::T) {
                    "1999"
                } else {
                    "zqx"
                };
                (s, v.to_owned())
            })
            .collect()
    }

    /// Shape used for the duplicate-pattern check: words plus anonymous slots.
    fn shape(&self) -> Vec<Option<&str>> {
        let pieces = strip_terminal(
            self.pieces.iter().collect(),
            |p| matches!(p, Piece::Word(w) if TERMINAL.contains(&w.as_str())),
        );
        pieces
            .into_iter()
            .map(|p| match p {
                Piece::Word(w) => Some(w.as_str()),
                Piece::Slot(_) => None,
            })
            .collect()
    }

    /// Walk every way the pattern fits `text`, shortest slots first, until
    /// `accept` returns true. Returns whether any binding was accepted.
    fn for_each_match(&self, text: &str, accept: &mut dyn FnMut(BTreeMap<String, String>) -> bool) -> bool {
        let spans = strip_terminal(split_spans(text), |s| TERMINAL.contains(&s.text));
        let folded: Vec<String> = spans.iter().map(|s| fold(s.text)).collect();
        let pieces = strip_terminal(
            self.pieces.clone(),
            |p| matches!(p, Piece::Word(w) if TERMINAL.contains(&w.as_str())),
        );
        let mut bindings = Vec::new();
        let mut on_full = |b: &[Binding]| {
            accept(
                b.iter()
                    .map(|(name, a, e)| (name.clone(), text[spans[*a].start..spans[*e - 1].end].to_owned()))
                    .collect(),
            )
        };
        match_from(&pieces, &folded, 0, 0, &mut bindings, &mut on_full)
    }

    fn matches(&self, text: &str) -> bool {
        self.for_each_match(text, &mut |_| true)
    }

    fn instantiate(&self, bindings: &BTreeMap<String, String>) -> Result<Alist, ParseError> {
        let mut attrs = BTreeMap::new();
        for (attr, sv) in &self.skeleton {
            let value = match sv {
                SkeletonValue::Const(c) => c.clone(),
                SkeletonValue::Slot(name) => normalize_slot(*attr, &bindings[name])?,
            };
            attrs.insert(*attr, value);
        }
        // validated templates only produce valid alists; anything else is a non-parse
        Alist::new(attrs).map_err(|_| ParseError::NoTemplate)
    }

    /// Parse `text` with this template alone. None when the pattern never
    /// fits; an error when it fits but no fit yields a valid alist.
    pub fn parse(&self, text: &str) -> Option<Result<Alist, ParseError>> {
        let mut result = None;
        let mut first_err = None;
        self.for_each_match(text, &mut |b| match self.instantiate(&b) {
            Ok(a) => {
                result = Some(a);
                true
            }
            Err(e) => {
                first_err.get_or_insert(e);
                false
            }
        });
        match (result, first_err) {
            (Some(a), _) => Some(Ok(a)),
            (None, Some(e)) => Some(Err(e)),
            (None, None) => None,
        }
    }
}

/// Slot name with the token range it covers.
type Binding = (String, usize, usize);

fn match_from(
    pieces: &[Piece],
    tokens: &[String],
    pi: usize,
    ti: usize,
    bindings: &mut Vec<Binding>,
    on_full: &mut dyn FnMut(&[Binding]) -> bool,
) -> bool {
    let Some(piece) = pieces.get(pi) else {
        return ti == tokens.len() && on_full(bindings);
    };
    match piece {
        Piece::Word(w) => tokens.get(ti) == Some(w) && match_from(pieces, tokens, pi + 1, ti + 1, bindings, on_full),
        Piece::Slot(name) => {
            let mut end = ti + 1;
            while end <= tokens.len() {
                if SLOT_STOP.contains(&tokens[end - 1].as_str()) {
                    return false;
                }
                bindings.push((name.clone(), ti, end));
                if match_from(pieces, tokens, pi + 1, end, bindings, on_full) {
                    return true;
                }
                bindings.pop();
                end += 1;
            }
            false
        }
    }
}

fn normalize_slot(attr: Attr, raw: &str) -> Result<AlistValue, ParseError> {
    let raw = raw.trim();
    match attr {
        Attr::T => {
            if raw.len() == 4 && raw.bytes().all(|b| b.is_ascii_digit()) {
                Ok(AlistValue::Int(raw.parse().expect("four digits")))
            } else {
                Err(ParseError::BadTime(raw.to_owned()))
            }
        }
        Attr::P => Ok(AlistValue::Literal(raw.to_lowercase())),
        Attr::S | Attr::H => Ok(AlistValue::Literal(raw.to_owned())),
        Attr::O | Attr::V => Ok(if let Ok(i) = raw.parse::<i64>() {
            AlistValue::Int(i)
        } else if let Some(r) = raw.parse::<f64>().ok().filter(|r| r.is_finite()) {
            AlistValue::Real(r)
        } else {
            AlistValue::Literal(raw.to_owned())
        }),
    }
}

/// An ordered, validated, mutually unambiguous set of templates.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut blocks: Vec<Vec<&str>> = vec![Vec::new()];
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('#') {
                continue;
            }
            if trimmed.is_empty() {
                if !blocks.last().unwrap().is_empty() {
                    blocks.push(Vec::new());
                }
            } else {
                blocks.last_mut().unwrap().push(trimmed);
            }
        }
        let templates = blocks
            .iter()
            .filter(|b| !b.is_empty())
            .enumerate()
            .map(|(i, b)| Template::from_block(b, i))
            .collect::<Result<Vec<_>, _>>()?;
        let set = Self { templates };
        set.check_ambiguity()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = fs::read_to_string(path).map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TEMPLATES).expect("bundled templates are valid")
    }

    fn check_ambiguity(&self) -> Result<(), TemplateError> {
        let mut ids = BTreeSet::new();
        for t in &self.templates {
            if !ids.insert(&t.id) {
                return Err(TemplateError::MalformedTemplate {
                    id: t.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        for (i, a) in self.templates.iter().enumerate() {
            let probe = render_pattern(&a.pattern, &a.probe_bindings());
            for b in &self.templates[i + 1..] {
                if a.shape() == b.shape() || b.matches(&probe) || {
                    let probe_b = render_pattern(&b.pattern, &b.probe_bindings());
                    a.matches(&probe_b)
                } {
                    return Err(TemplateError::AmbiguousTemplates(vec![a.id.clone(), b.id.clone()]));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Template> {
        self.templates.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}

fn render_pattern(pattern: &str, bindings: &BTreeMap<String, String>) -> String {
    slot_re()
        .replace_all(pattern, |c: &regex::Captures| {
            bindings.get(&c[1]).cloned().unwrap_or_default()
        })
        .into_owned()
}

/// Parse with the first matching template. A time slot that is not a
/// four-digit year is [`ParseError::BadTime`] unless a later template parses.
pub fn parse_question(text: &str, templates: &TemplateSet) -> Result<Alist, ParseError> {
    let mut first_err = None;
    for t in templates.iter() {
        match t.parse(text) {
            Some(Ok(a)) => return Ok(a),
            Some(Err(e @ ParseError::BadTime(_))) => {
                first_err.get_or_insert(e);
            }
            Some(Err(_)) | None => {}
        }
    }
    Err(first_err.unwrap_or(ParseError::NoTemplate))
}

/// Fill the template's pattern with values from an alist that unifies with its skeleton.
pub fn render_question(alist: &Alist, template: &Template) -> Result<String, TemplateError> {
    let fail = |reason: String| TemplateError::UnificationFailure {
        id: template.id.clone(),
        reason,
    };
    let alist_keys: BTreeSet<Attr> = alist.attrs().keys().copied().collect();
    let skel_keys: BTreeSet<Attr> = template.skeleton.keys().copied().collect();
    if alist_keys != skel_keys {
        return Err(fail(format!("attributes {alist_keys:?} vs skeleton {skel_keys:?}")));
    }
    let mut bindings = BTreeMap::new();
    // skeleton variable -> alist variable, must be a bijection
    let mut var_map: BTreeMap<&str, &str> = BTreeMap::new();
    for (attr, sv) in &template.skeleton {
        let value = alist.get(*attr).expect("same key set");
        match sv {
            SkeletonValue::Slot(name) => {
                if matches!(value, AlistValue::Var(_)) {
                    return Err(fail(format!("`{attr}` is a variable but the template expects text")));
                }
                bindings.insert(name.clone(), value.surface());
            }
            SkeletonValue::Const(AlistValue::Var(sk)) => {
                let AlistValue::Var(av) = value else {
                    return Err(fail(format!("`{attr}` should be a variable")));
                };
                match var_map.get(sk.as_str()) {
                    Some(prev) if prev != av => return Err(fail(format!("variable ?{sk} bound twice"))),
                    Some(_) => {}
                    None => {
                        if var_map.values().any(|v| v == av) {
                            return Err(fail(format!("variable ?{av} aliases two template variables")));
                        }
                        var_map.insert(sk, av);
                    }
                }
            }
            SkeletonValue::Const(c) => {
                let single =
                    |v: &AlistValue| Alist::from_pairs([(Attr::H, AlistValue::literal("value")), (Attr::S, v.clone())]);
                let same = match (single(c), single(value)) {
                    (Ok(x), Ok(y)) => super::alist_equivalent(&x, &y),
                    _ => false,
                };
                if !same {
                    return Err(fail(format!("`{attr}` is {value} but the template fixes {c}")));
                }
            }
        }
    }
    Ok(render_pattern(&template.pattern, &bindings))
}
