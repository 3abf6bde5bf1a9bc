//! Ten words to order alphabetically: a run of five lexicon neighbours mixed
//! with five others.

use rand::Rng;

use super::{DatasetError, SortTask, TaskKind};
use crate::noise::shuffle_slice;
use crate::ranking::{ItemList, Ranking};
use crate::rng::stream_rng;

pub const WORDSORT_SIZE: usize = 10;
pub const WORDSORT_CONSECUTIVE: usize = 5;

const BUNDLED: &str = include_str!("lexicon.txt");

pub fn default_lexicon() -> Vec<String> {
    parse_lexicon(BUNDLED).expect("bundled lexicon is valid")
}

/// One word per line, blank lines ignored; must be strictly increasing.
pub fn parse_lexicon(text: &str) -> Result<Vec<String>, DatasetError> {
    let mut words: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let word = line.trim();
        if word.is_empty() {
            continue;
        }
        if let Some(prev) = words.last() {
            if prev.as_str() >= word {
                return Err(DatasetError::LexiconUnsorted {
                    line: i + 1,
                    prev: prev.clone(),
                    next: word.to_string(),
                });
            }
        }
        words.push(word.to_string());
    }
    Ok(words)
}

/// `count` tasks over a sorted, duplicate-free `lexicon`.
pub fn gen_wordsort(lexicon: &[String], count: usize, seed: u64) -> Result<Vec<SortTask>, DatasetError> {
    if count == 0 {
        return Err(DatasetError::EmptyCount);
    }
    if lexicon.len() < WORDSORT_SIZE {
        return Err(DatasetError::LexiconTooSmall(lexicon.len()));
    }
    if let Some(k) = (1..lexicon.len()).find(|&k| lexicon[k - 1] >= lexicon[k]) {
        return Err(DatasetError::LexiconUnsorted {
            line: k + 1,
            prev: lexicon[k - 1].clone(),
            next: lexicon[k].clone(),
        });
    }
    let mut tasks = Vec::with_capacity(count);
    for t in 0..count {
        let mut rng = stream_rng(seed, t as u64);
        let start = rng.random_range(0..=lexicon.len() - WORDSORT_CONSECUTIVE);
        let mut chosen: Vec<usize> = (start..start + WORDSORT_CONSECUTIVE).collect();
        let mut rest: Vec<usize> = (0..lexicon.len()).filter(|i| !chosen.contains(i)).collect();
        for k in 0..WORDSORT_SIZE - WORDSORT_CONSECUTIVE {
            let j = rng.random_range(k..rest.len());
            rest.swap(k, j);
            chosen.push(rest[k]);
        }
        shuffle_slice(&mut chosen, &mut rng);
        let mut gold: Vec<usize> = (0..chosen.len()).collect();
        gold.sort_by_key(|&p| chosen[p]);
        let items = ItemList::from_texts(chosen.iter().map(|&i| lexicon[i].clone()));
        tasks.push(SortTask::new(
            format!("word-{t}"),
            items,
            Ranking::from_zero_based(gold)?,
            TaskKind::Word,
        )?);
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn bundled_lexicon_is_usable() {
        let lex = default_lexicon();
        assert!(lex.len() >= 300);
        assert!(lex.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn tasks_hold_a_consecutive_run() {
        let lex = default_lexicon();
        let index: HashMap<&str, usize> = lex.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        for task in gen_wordsort(&lex, 100, 4).unwrap() {
            assert_eq!(task.len(), WORDSORT_SIZE);
            let mut idx: Vec<usize> = task.items.texts().map(|w| index[w]).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), WORDSORT_SIZE);
            let has_run = idx.windows(WORDSORT_CONSECUTIVE).any(|w| w[WORDSORT_CONSECUTIVE - 1] - w[0] == 4);
            assert!(has_run, "{idx:?}");
            let along_gold: Vec<&str> = task.gold.as_slice().iter().map(|&i| task.items.get(i).text.as_str()).collect();
            let mut sorted = along_gold.clone();
            sorted.sort_unstable();
            assert_eq!(along_gold, sorted);
        }
    }

    #[test]
    fn small_or_unsorted_lexicons_are_rejected() {
        let tiny: Vec<String> = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        assert!(matches!(gen_wordsort(&tiny, 1, 0), Err(DatasetError::LexiconTooSmall(5))));
        let mut lex = default_lexicon();
        lex.swap(3, 4);
        assert!(matches!(gen_wordsort(&lex, 1, 0), Err(DatasetError::LexiconUnsorted { line: 5, .. })));
        assert!(matches!(parse_lexicon("b\na\n"), Err(DatasetError::LexiconUnsorted { line: 2, .. })));
        assert_eq!(parse_lexicon("a\n\nb\n").unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn exactly_ten_words_suffice() {
        let lex: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let tasks = gen_wordsort(&lex, 3, 0).unwrap();
        assert!(tasks.iter().all(|t| t.len() == 10));
        assert_eq!(gen_wordsort(&lex, 3, 0).unwrap(), tasks);
    }
}
