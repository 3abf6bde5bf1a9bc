//! TREC run and qrels files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc: String,
    pub score: f64,
}

/// Per-query result lists, best first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrecRun {
    pub tag: String,
    pub queries: BTreeMap<String, Vec<RunEntry>>,
}

impl TrecRun {
    pub fn new(tag: impl Into<String>) -> Self {
        TrecRun {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Add an ordered list, scored `len, len-1, …, 1`.
    pub fn insert_ordered<S: Into<String>>(&mut self, qid: impl Into<String>, docs: impl IntoIterator<Item = S>) {
        let docs: Vec<String> = docs.into_iter().map(Into::into).collect();
        let len = docs.len();
        let entries = docs
            .into_iter()
            .enumerate()
            .map(|(i, doc)| RunEntry {
                doc,
                score: (len - i) as f64,
            })
            .collect();
        self.queries.insert(qid.into(), entries);
    }

    pub fn docs(&self, qid: &str) -> Option<Vec<&str>> {
        self.queries.get(qid).map(|e| e.iter().map(|r| r.doc.as_str()).collect())
    }
}

/// Graded judgments, `qid → doc → relevance`.
pub type Qrels = BTreeMap<String, BTreeMap<String, i32>>;

fn fields(line: &str, expected: usize, lineno: usize, what: &str) -> Result<Vec<String>, DatasetError> {
    let parts: Vec<String> = line.split_whitespace().map(String::from).collect();
    if parts.len() != expected {
        return Err(DatasetError::line(
            lineno,
            format!("{what} line needs {expected} fields, found {}", parts.len()),
        ));
    }
    Ok(parts)
}

/// Read `qid Q0 docid rank score tag` lines. Each query's list is ordered by
/// descending score, ties kept in file order.
pub fn read_trec_run<R: BufRead>(input: R) -> Result<TrecRun, DatasetError> {
    let mut run = TrecRun::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(&line, 6, i + 1, "run")?;
        f[3].parse::<u64>()
            .map_err(|_| DatasetError::line(i + 1, format!("bad rank {:?}", f[3])))?;
        let score: f64 = f[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| DatasetError::line(i + 1, format!("bad score {:?}", f[4])))?;
        if run.tag.is_empty() {
            run.tag = f[5].clone();
        }
        run.queries.entry(f[0].clone()).or_default().push(RunEntry {
            doc: f[2].clone(),
            score,
        });
    }
    for entries in run.queries.values_mut() {
        entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    }
    Ok(run)
}

/// Write a run with ranks regenerated as `1, 2, …`. Scores must strictly
/// decrease within each query.
pub fn write_trec_run<W: Write>(run: &TrecRun, mut out: W) -> Result<(), DatasetError> {
    let tag = if run.tag.is_empty() { "permsc" } else { run.tag.as_str() };
    for (qid, entries) in &run.queries {
        if let Some(w) = entries.windows(2).find(|w| w[0].score <= w[1].score) {
            return Err(DatasetError::InvalidRun(format!(
                "query {qid}: scores must strictly decrease ({} then {})",
                w[0].score, w[1].score
            )));
        }
        for (rank, e) in entries.iter().enumerate() {
            writeln!(out, "{qid} Q0 {} {} {} {tag}", e.doc, rank + 1, e.score)?;
        }
    }
    Ok(())
}

/// Read `qid iter docid rel` lines.
pub fn read_qrels<R: BufRead>(input: R) -> Result<Qrels, DatasetError> {
    let mut qrels = Qrels::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(&line, 4, i + 1, "qrels")?;
        let rel: i32 = f[3]
            .parse()
            .map_err(|_| DatasetError::line(i + 1, format!("bad relevance {:?}", f[3])))?;
        qrels.entry(f[0].clone()).or_default().insert(f[2].clone(), rel);
    }
    Ok(qrels)
}

/// Read `key<TAB>text` lines, as used for queries and passage collections.
pub fn read_tsv_map<R: BufRead>(input: R) -> Result<BTreeMap<String, String>, DatasetError> {
    let mut map = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (key, text) = line
            .split_once('\t')
            .ok_or_else(|| DatasetError::line(i + 1, "expected key<TAB>text"))?;
        map.insert(key.trim().to_string(), text.trim().to_string());
    }
    Ok(map)
}
