//! Graded nDCG with gain `2^rel - 1` and discount `log2(rank + 1)`.

use serde::{Deserialize, Serialize};

use super::trec::{Qrels, TrecRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryFlag {
    /// The qrels hold no document with positive relevance.
    NoRelevant,
    /// The run has no list for this query.
    MissingFromRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub qid: String,
    pub ndcg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<QueryFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdcgReport {
    pub k: usize,
    /// One entry per judged query, in qid order.
    pub per_query: Vec<QueryScore>,
    pub mean: f64,
}

fn gain(rel: i32) -> f64 {
    if rel <= 0 {
        0.0
    } else {
        2f64.powi(rel) - 1.0
    }
}

fn dcg(rels: impl Iterator<Item = i32>, k: usize) -> f64 {
    rels.take(k)
        .enumerate()
        .map(|(i, rel)| gain(rel) / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG@k of one ranked list against one query's judgments.
pub fn ndcg_single(docs: &[&str], judged: &std::collections::BTreeMap<String, i32>, k: usize) -> Option<f64> {
    let mut ideal: Vec<i32> = judged.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter(), k);
    if idcg <= 0.0 {
        return None;
    }
    let actual = dcg(docs.iter().map(|d| judged.get(*d).copied().unwrap_or(0)), k);
    Some(actual / idcg)
}

/// Score every judged query. Queries without relevant documents, or absent
/// from the run, score 0 and are flagged; `k == 0` yields an empty report.
pub fn ndcg_at_k(run: &TrecRun, qrels: &Qrels, k: usize) -> NdcgReport {
    let per_query: Vec<QueryScore> = qrels
        .iter()
        .map(|(qid, judged)| {
            let (ndcg, flag) = match run.docs(qid) {
                None => (0.0, Some(QueryFlag::MissingFromRun)),
                Some(docs) => match ndcg_single(&docs, judged, k) {
                    Some(v) => (v, None),
                    None => (0.0, Some(QueryFlag::NoRelevant)),
                },
            };
            QueryScore {
                qid: qid.clone(),
                ndcg,
                flag,
            }
        })
        .collect();
    let mean = if per_query.is_empty() || k == 0 {
        0.0
    } else {
        per_query.iter().map(|q| q.ndcg).sum::<f64>() / per_query.len() as f64
    };
    NdcgReport { k, per_query, mean }
}
