//! Sentence-unscrambling tasks from user-supplied ordered passages.
//!
//! Each JSONL record is an array of sentences, an object with a
//! `sentences` array, or an object with a `text` field that is split into
//! sentences. Objects may carry an `id`.

use std::io::BufRead;

use serde::Deserialize;

use super::{DatasetError, SortTask, TaskKind};
use crate::ranking::{random_ranking, Item, ItemList};
use crate::rng::stream_rng;

#[derive(Deserialize)]
#[serde(untagged)]
enum Record {
    Bare(Vec<String>),
    Sentences { id: Option<String>, sentences: Vec<String> },
    Text { id: Option<String>, text: String },
}

/// Split prose after `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// One task per record; record `r` is shuffled with stream `r` of `seed`.
pub fn load_sentence_sort<R: BufRead>(input: R, seed: u64) -> Result<Vec<SortTask>, DatasetError> {
    let mut tasks = Vec::new();
    let mut record_index = 0u64;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|_| DatasetError::line(i + 1, "expected a sentence array or an object with sentences/text"))?;
        let (id, sentences) = match record {
            Record::Bare(s) => (None, s),
            Record::Sentences { id, sentences } => (id, sentences),
            Record::Text { id, text } => (id, split_sentences(&text)),
        };
        if sentences.len() < 2 {
            return Err(DatasetError::line(
                i + 1,
                format!("record has {} sentence(s), at least 2 are needed", sentences.len()),
            ));
        }
        let source = ItemList::new(
            sentences
                .into_iter()
                .enumerate()
                .map(|(k, s)| Item::new((k + 1).to_string(), s))
                .collect(),
        )?;
        let shuffle = random_ranking(source.len(), &mut stream_rng(seed, record_index))?;
        let items = source.apply(&shuffle)?;
        let id = id.unwrap_or_else(|| format!("sentence-{record_index}"));
        tasks.push(SortTask::new(id, items, shuffle.invert(), TaskKind::Sentence)?);
        record_index += 1;
    }
    Ok(tasks)
}
