//! Sorting-task generators, evaluation metrics and TREC interchange.

pub mod mathsort;
pub mod metrics;
pub mod sentences;
pub mod trec;
pub mod wordsort;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranker::PromptStyle;
use crate::ranking::{kendall_tau, ItemList, Ranking, RankingError};

pub use mathsort::{evaluate_expression, gen_mathsort, MATHSORT_SIZE};
pub use metrics::{ndcg_at_k, NdcgReport, QueryFlag, QueryScore};
pub use sentences::{load_sentence_sort, split_sentences};
pub use trec::{read_qrels, read_trec_run, write_trec_run, Qrels, RunEntry, TrecRun};
pub use wordsort::{default_lexicon, gen_wordsort, WORDSORT_CONSECUTIVE, WORDSORT_SIZE};

pub const DEFAULT_COUNT: usize = 100;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("lexicon has {0} distinct words, at least {min} are needed", min = WORDSORT_SIZE)]
    LexiconTooSmall(usize),
    #[error("lexicon is not sorted at line {line}: {prev:?} then {next:?}")]
    LexiconUnsorted { line: usize, prev: String, next: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("count must be at least 1")]
    EmptyCount,
    #[error("could not generate {requested} distinct tasks")]
    Exhausted { requested: usize },
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        DatasetError::Line {
            line,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Math,
    Word,
    Sentence,
}

impl TaskKind {
    pub fn prompt_style(self) -> PromptStyle {
        match self {
            TaskKind::Math => PromptStyle::MathSort,
            TaskKind::Word => PromptStyle::WordSort,
            TaskKind::Sentence => PromptStyle::SentenceSort,
        }
    }
}

/// A presented (scrambled) item list and its true order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortTask {
    pub id: String,
    pub items: ItemList,
    /// `gold(k)` is the index of the item that truly belongs at position `k`.
    pub gold: Ranking,
    pub kind: TaskKind,
}

impl SortTask {
    pub fn new(id: impl Into<String>, items: ItemList, gold: Ranking, kind: TaskKind) -> Result<Self, RankingError> {
        if items.len() != gold.len() {
            return Err(RankingError::DimensionMismatch {
                left: items.len(),
                right: gold.len(),
            });
        }
        Ok(SortTask {
            id: id.into(),
            items,
            gold,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Kendall tau between a prediction and the task's gold order.
pub fn score_sort(prediction: &Ranking, task: &SortTask) -> Result<f64, RankingError> {
    kendall_tau(prediction, &task.gold)
}

pub fn write_tasks<W: Write>(tasks: &[SortTask], mut out: W) -> Result<(), DatasetError> {
    for task in tasks {
        serde_json::to_writer(&mut out, task).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tasks<R: BufRead>(input: R) -> Result<Vec<SortTask>, DatasetError> {
    let mut tasks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let task: SortTask = serde_json::from_str(&line).map_err(|e| DatasetError::line(i + 1, e.to_string()))?;
        if task.items.len() != task.gold.len() {
            return Err(DatasetError::line(
                i + 1,
                format!("{} items but gold ranks {}", task.items.len(), task.gold.len()),
            ));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::random_ranking;
    use crate::rng::seeded_rng;

    #[test]
    fn score_sort_examples() {
        let tasks = gen_mathsort(1, 3).unwrap();
        let task = &tasks[0];
        assert_eq!(score_sort(&task.gold, task).unwrap(), 1.0);
        assert_eq!(score_sort(&task.gold.reversed(), task).unwrap(), -1.0);
        let mut swapped = task.gold.clone().into_vec();
        swapped.swap(4, 5);
        let tau = score_sort(&Ranking::from_zero_based(swapped).unwrap(), task).unwrap();
        assert!((tau - (1.0 - 2.0 / 45.0)).abs() < 1e-12);
    }

    #[test]
    fn score_sort_is_kendall_tau() {
        let mut rng = seeded_rng(5);
        for task in gen_mathsort(30, 1).unwrap() {
            let p = random_ranking(task.len(), &mut rng).unwrap();
            assert_eq!(score_sort(&p, &task).unwrap(), kendall_tau(&p, &task.gold).unwrap());
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let tasks = gen_wordsort(&default_lexicon(), 5, 2).unwrap();
        let mut buf = Vec::new();
        write_tasks(&tasks, &mut buf).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.lines().next().unwrap().contains("\"kind\":\"word\""));
        assert_eq!(read_tasks(&buf[..]).unwrap(), tasks);
        let bad = b"{\"id\":\"x\",\"items\":[{\"id\":\"1\",\"text\":\"a\"}],\"gold\":[1,2],\"kind\":\"word\"}\n";
        assert!(matches!(read_tasks(&bad[..]), Err(DatasetError::Line { line: 1, .. })));
        assert!(matches!(read_tasks(&b"\nnot json\n"[..]), Err(DatasetError::Line { line: 2, .. })));
    }
}
