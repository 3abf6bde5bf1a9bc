//! Extraction of rankings from free-text model outputs.
//!
//! Parsing is total once a single valid identifier is found: out-of-range
//! identifiers are dropped, repeated ones are kept at their first occurrence,
//! and anything never mentioned is appended in presented order.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::prompt::PromptStyle;
use crate::ranking::{ItemList, Ranking};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no item identifiers could be extracted from output {0:?}")]
    Unparseable(String),
    #[error("cannot parse a ranking of zero items")]
    NoItems,
}

fn identifier_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*(\d+)\s*\]").expect("valid regex"))
}

fn list_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)]|\[\d+\])\s*").expect("valid regex"))
}

/// Apply the repair policy to 0-based candidates for a list of `n` items.
pub fn repair(candidates: impl IntoIterator<Item = usize>, n: usize) -> Option<Ranking> {
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for c in candidates {
        if c < n && !seen[c] {
            seen[c] = true;
            order.push(c);
        }
    }
    if order.is_empty() {
        return None;
    }
    order.extend((0..n).filter(|&i| !seen[i]));
    Some(Ranking::from_zero_based(order).expect("repair emits a permutation"))
}

/// Parse a `[a] > [b] > …` chain over `n` presented items.
pub fn parse_identifier_chain(text: &str, n: usize) -> Result<Ranking, ParseError> {
    if n == 0 {
        return Err(ParseError::NoItems);
    }
    let ids = identifier_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .map(|k| k - 1);
    repair(ids, n).ok_or_else(|| ParseError::Unparseable(text.to_string()))
}

fn normalize(style: PromptStyle, s: &str) -> String {
    let s = s.trim().trim_matches(|c| matches!(c, '`' | '"' | '\''));
    match style {
        PromptStyle::MathSort => s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| if c == '−' { '-' } else { c })
            .collect(),
        PromptStyle::WordSort => s.trim_end_matches('.').trim().to_lowercase(),
        _ => s.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

/// Parse the output of a model prompted with `style` over `presented`.
///
/// Passage styles read `[k]` identifiers. Math and word styles read a
/// comma-separated list and match entries against the presented payloads;
/// sentence styles do the same line by line.
pub fn parse_ranking_output(text: &str, presented: &ItemList, style: PromptStyle) -> Result<Ranking, ParseError> {
    let n = presented.len();
    if n == 0 {
        return Err(ParseError::NoItems);
    }
    if style.uses_identifiers() {
        return parse_identifier_chain(text, n);
    }
    let targets: Vec<String> = presented.texts().map(|t| normalize(style, t)).collect();
    let pieces: Vec<&str> = match style {
        PromptStyle::SentenceSort => text.lines().collect(),
        _ => text.split([',', '\n']).collect(),
    };
    let matched = pieces.into_iter().filter_map(|piece| {
        let piece = match style {
            PromptStyle::SentenceSort => list_marker_re().replace(piece, "").into_owned(),
            PromptStyle::MathSort => piece.trim().trim_end_matches('.').to_string(),
            _ => piece.to_string(),
        };
        let key = normalize(style, &piece);
        if key.is_empty() {
            return None;
        }
        targets.iter().position(|t| *t == key)
    });
    repair(matched, n).ok_or_else(|| ParseError::Unparseable(text.to_string()))
}
