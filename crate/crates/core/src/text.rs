//! Unicode helpers and the word/punctuation splitter shared by the metrics,
//! the error scanner and the template parser.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// NFC-normalize a string.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Trim, collapse internal whitespace runs to a single space and NFC-normalize.
pub fn squash_whitespace(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    nfc(&joined)
}

/// True when the text carries at least one combining mark after canonical decomposition.
pub fn has_diacritic(text: &str) -> bool {
    text.nfd().any(is_combining_mark)
}

/// Remove combining marks under canonical decomposition, then recompose.
pub fn strip_diacritics(text: &str) -> String {
    text.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// A token together with its byte span in the text it was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Split on whitespace and cut every punctuation or symbol character into its
/// own token. An apostrophe directly following a word and followed by a
/// letter starts a clitic token (`Who's` becomes `Who`, `'s`).
///
/// Case and normalization are left untouched; callers decide.
pub fn split_spans<'a>(text: &'a str) -> Vec<Span<'a>> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let push = |out: &mut Vec<Span<'a>>, s: usize, e: usize| {
        if e > s {
            out.push(Span {
                text: &text[s..e],
                start: s,
                end: e,
            });
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            if let Some(s) = word_start.take() {
                push(&mut out, s, pos);
            }
        } else if c.is_alphanumeric() || is_combining_mark(c) {
            if word_start.is_none() {
                word_start = Some(pos);
            }
        } else if is_apostrophe(c) && word_start.is_some() && chars.get(i + 1).is_some_and(|(_, n)| n.is_alphabetic()) {
            let s = word_start.take().unwrap();
            push(&mut out, s, pos);
            word_start = Some(pos);
        } else {
            if let Some(s) = word_start.take() {
                push(&mut out, s, pos);
            }
            push(&mut out, pos, pos + c.len_utf8());
        }
        i += 1;
    }
    if let Some(s) = word_start {
        push(&mut out, s, text.len());
    }
    out
}

/// Token strings of [`split_spans`].
pub fn split_tokens(text: &str) -> Vec<&str> {
    split_spans(text).into_iter().map(|s| s.text).collect()
}
