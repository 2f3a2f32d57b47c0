//! Association lists ("alists"): attribute-value maps over
//! subject, property, object, time, inference operation and value.
//!
//! Alists serialize as JSON objects keyed `s, p, o, t, h, v` in that order.
//! Variables are strings of the form `?name`.

mod recovery;
mod template;

pub use recovery::{
    load_cases, parse_cases, recovery_experiment, BacktranslationParaphraser, CaseOutcome, CaseResult,
    IdentityParaphraser, LookupParaphraser, Paraphraser, RecoveryCase, RecoveryError, RecoveryReport, BUNDLED_CASES,
};
pub use template::{
    parse_question, render_question, ParseError, SkeletonValue, Template, TemplateError, TemplateSet, BUNDLED_TEMPLATES,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paragen::PpdbIndex;
use crate::text::squash_whitespace;

/// Inference operations an alist may name in `h`.
pub const OPERATIONS: [&str; 6] = ["value", "max", "min", "count", "comp", "regress"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlistError {
    #[error("missing inference operation `h`")]
    MissingOperation,
    #[error("unknown inference operation {0:?}")]
    UnknownOperation(String),
    #[error("invalid variable name {0:?}")]
    BadVariable(String),
    #[error("variable {0} in `v` is not bound by `s` or `o`")]
    UnboundVariable(String),
    #[error("time must be a year integer, got {0}")]
    BadTime(String),
    #[error("non-finite number in `{0}`")]
    NonFinite(Attr),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("unsupported value for `{0}`")]
    BadValue(Attr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attr {
    S,
    P,
    O,
    T,
    H,
    V,
}

impl Attr {
    pub const ALL: [Attr; 6] = [Attr::S, Attr::P, Attr::O, Attr::T, Attr::H, Attr::V];

    pub fn as_str(self) -> &'static str {
        match self {
            Attr::S => "s",
            Attr::P => "p",
            Attr::O => "o",
            Attr::T => "t",
            Attr::H => "h",
            Attr::V => "v",
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attr {
    type Err = AlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attr::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| AlistError::UnknownAttribute(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlistValue {
    Literal(String),
    Int(i64),
    Real(f64),
    /// Variable name without the leading `?`.
    Var(String),
}

fn var_name_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z][a-z0-9]*$").unwrap())
}

impl AlistValue {
    pub fn literal(s: impl Into<String>) -> Self {
        AlistValue::Literal(s.into())
    }

    pub fn var(name: &str) -> Result<Self, AlistError> {
        let bare = name.strip_prefix('?').unwrap_or(name);
        if var_name_re().is_match(bare) {
            Ok(AlistValue::Var(bare.to_owned()))
        } else {
            Err(AlistError::BadVariable(name.to_owned()))
        }
    }

    /// `?name` strings are variables, everything else a literal.
    pub fn from_text(s: &str) -> Result<Self, AlistError> {
        if s.starts_with('?') {
            Self::var(s)
        } else {
            Ok(AlistValue::Literal(s.to_owned()))
        }
    }

    pub fn as_literal(&self) -> Option<&str> {
        match self {
            AlistValue::Literal(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            AlistValue::Var(v) => Some(v),
            _ => None,
        }
    }

    fn as_number(&self) -> Option<f64> {
        match self {
            AlistValue::Int(i) => Some(*i as f64),
            AlistValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Text as it appears in a question.
    pub fn surface(&self) -> String {
        match self {
            AlistValue::Literal(s) => s.clone(),
            AlistValue::Int(i) => i.to_string(),
            AlistValue::Real(r) => r.to_string(),
            AlistValue::Var(v) => format!("?{v}"),
        }
    }
}

impl fmt::Display for AlistValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlistValue::Literal(s) => write!(f, "{s:?}"),
            other => f.write_str(&other.surface()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alist {
    attrs: BTreeMap<Attr, AlistValue>,
}

impl Alist {
    /// Validate and build. `h` must name a known operation; `t` must be a year
    /// integer; a variable in `v` must be bound in `s` or `o`, except under
    /// `comp`, where `v` names the comparison result.
    pub fn new(attrs: BTreeMap<Attr, AlistValue>) -> Result<Self, AlistError> {
        match attrs.get(&Attr::H) {
            None => return Err(AlistError::MissingOperation),
            Some(AlistValue::Literal(op)) if OPERATIONS.contains(&op.as_str()) => {}
            Some(other) => return Err(AlistError::UnknownOperation(other.surface())),
        }
        for (attr, value) in &attrs {
            match value {
                AlistValue::Real(r) if !r.is_finite() => return Err(AlistError::NonFinite(*attr)),
                AlistValue::Var(v) if !var_name_re().is_match(v) => return Err(AlistError::BadVariable(v.clone())),
                _ => {}
            }
        }
        if let Some(t) = attrs.get(&Attr::T) {
            match t {
                AlistValue::Int(y) if (0..=9999).contains(y) => {}
                other => return Err(AlistError::BadTime(other.surface())),
            }
        }
        let is_comp = attrs.get(&Attr::H).and_then(AlistValue::as_literal) == Some("comp");
        if let Some(AlistValue::Var(v)) = attrs.get(&Attr::V) {
            let bound = [Attr::S, Attr::O]
                .iter()
                .any(|a| attrs.get(a).and_then(AlistValue::as_var) == Some(v.as_str()));
            if !bound && !is_comp {
                return Err(AlistError::UnboundVariable(format!("?{v}")));
            }
        }
        Ok(Self { attrs })
    }

    pub fn from_pairs<I: IntoIterator<Item = (Attr, AlistValue)>>(pairs: I) -> Result<Self, AlistError> {
        Self::new(pairs.into_iter().collect())
    }

    pub fn get(&self, attr: Attr) -> Option<&AlistValue> {
        self.attrs.get(&attr)
    }

    pub fn attrs(&self) -> &BTreeMap<Attr, AlistValue> {
        &self.attrs
    }

    pub fn operation(&self) -> &str {
        self.attrs[&Attr::H].as_literal().expect("validated at construction")
    }

    /// Copy with one attribute replaced, revalidated.
    pub fn with(&self, attr: Attr, value: AlistValue) -> Result<Self, AlistError> {
        let mut attrs = self.attrs.clone();
        attrs.insert(attr, value);
        Self::new(attrs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("alist serializes")
    }

    /// Canonical form for equivalence: variables renamed `y0, y1, ...` by first
    /// appearance in attribute order, literals case-folded with whitespace
    /// squashed, numbers as `f64`.
    fn canonical(&self) -> BTreeMap<Attr, Canon> {
        let mut names: HashMap<&str, usize> = HashMap::new();
        self.attrs
            .iter()
            .map(|(a, v)| {
                let c = match v {
                    AlistValue::Literal(s) => Canon::Text(squash_whitespace(s).to_lowercase()),
                    AlistValue::Var(name) => {
                        let next = names.len();
                        Canon::Var(*names.entry(name.as_str()).or_insert(next))
                    }
                    num => Canon::Num(num.as_number().expect("numeric").to_bits()),
                };
                (*a, c)
            })
            .collect()
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Canon {
    Text(String),
    Num(u64),
    Var(usize),
}

/// Same attribute-value pairs up to consistent variable renaming, string
/// case, and numeric representation.
pub fn alist_equivalent(a: &Alist, b: &Alist) -> bool {
    // +0.0 and -0.0 differ in bits; normalize through an addition
    fn fix(mut m: BTreeMap<Attr, Canon>) -> BTreeMap<Attr, Canon> {
        for c in m.values_mut() {
            if let Canon::Num(bits) = c {
                *bits = (f64::from_bits(*bits) + 0.0).to_bits();
            }
        }
        m
    }
    fix(a.canonical()) == fix(b.canonical())
}

/// Up to `k` alists with the property replaced by its ranked PPDB paraphrases.
/// The original property and repeated paraphrases are skipped.
pub fn paraphrase_property(alist: &Alist, index: &PpdbIndex, k: usize) -> Vec<Alist> {
    let Some(p) = alist.get(Attr::P).and_then(AlistValue::as_literal) else {
        return Vec::new();
    };
    let original = squash_whitespace(p).to_lowercase();
    let mut seen = vec![original];
    let mut out = Vec::new();
    for entry in index.lookup(p) {
        if out.len() == k {
            break;
        }
        let key = squash_whitespace(&entry.rhs_phrase).to_lowercase();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        if let Ok(a) = alist.with(Attr::P, AlistValue::Literal(entry.rhs_phrase.clone())) {
            out.push(a);
        }
    }
    out
}

impl Serialize for Alist {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.attrs.len()))?;
        for (attr, value) in &self.attrs {
            match value {
                AlistValue::Literal(s) => map.serialize_entry(attr.as_str(), s)?,
                AlistValue::Int(i) => map.serialize_entry(attr.as_str(), i)?,
                AlistValue::Real(r) => map.serialize_entry(attr.as_str(), r)?,
                AlistValue::Var(v) => map.serialize_entry(attr.as_str(), &format!("?{v}"))?,
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Alist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct AlistVisitor;

        impl<'de> Visitor<'de> for AlistVisitor {
            type Value = Alist;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an alist object keyed by s, p, o, t, h, v")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Alist, A::Error> {
                let mut attrs = BTreeMap::new();
                while let Some((key, value)) = access.next_entry::<String, serde_json::Value>()? {
                    let attr: Attr = key.parse().map_err(de::Error::custom)?;
                    let v = match value {
                        serde_json::Value::String(s) => AlistValue::from_text(&s).map_err(de::Error::custom)?,
                        serde_json::Value::Number(n) => match n.as_i64() {
                            Some(i) => AlistValue::Int(i),
                            None => AlistValue::Real(n.as_f64().ok_or_else(|| de::Error::custom("bad number"))?),
                        },
                        _ => return Err(de::Error::custom(AlistError::BadValue(attr))),
                    };
                    if attrs.insert(attr, v).is_some() {
                        return Err(de::Error::custom(format!("duplicate attribute {attr}")));
                    }
                }
                Alist::new(attrs).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(AlistVisitor)
    }
}
