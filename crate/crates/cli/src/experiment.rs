//! Ranking whole datasets and TREC runs, and summarising the results.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use permsc::aggregation::Method;
use permsc::datasets::{Qrels, SortTask, TrecRun};
use permsc::noise::NoiseModel;
use permsc::pipeline::{psc_rank, windowed_rerank, RankingSample, WindowRun};
use permsc::ranker::{ChatClient, PromptStyle, Ranker, RemoteRanker, SimulatedRanker, TruthOracle};
use permsc::ranking::{kendall_tau, Item, ItemList, Ranking};
use permsc::rng::derive_seed;
use permsc::stats::{mean, median};

use crate::config::{RankerSpec, ResolvedPsc};
use crate::error::{config_error, CliResult};
use crate::manifest::TaskFailure;

/// Builds the ranker for each list.
pub enum RankerFactory {
    Simulated {
        noise: NoiseModel,
        text: bool,
        style: Option<PromptStyle>,
    },
    Remote {
        ranker: RemoteRanker,
        style: Option<PromptStyle>,
    },
}

impl RankerFactory {
    pub fn simulated(noise: NoiseModel) -> Self {
        RankerFactory::Simulated {
            noise,
            text: false,
            style: None,
        }
    }

    /// A missing credential is a config error.
    pub fn from_spec(spec: &RankerSpec) -> CliResult<Self> {
        Ok(match spec {
            RankerSpec::Simulated { noise, text, style } => RankerFactory::Simulated {
                noise: noise.clone(),
                text: *text,
                style: *style,
            },
            RankerSpec::Remote { endpoint, style } => {
                let client = ChatClient::from_env(endpoint.clone()).map_err(config_error)?;
                RankerFactory::Remote {
                    ranker: RemoteRanker::new(client, style.unwrap_or(PromptStyle::RankGpt)),
                    style: *style,
                }
            }
        })
    }

    /// Style for a list whose natural template is `natural`.
    pub fn style_for(&self, natural: PromptStyle) -> PromptStyle {
        match self {
            RankerFactory::Simulated { style, .. } | RankerFactory::Remote { style, .. } => style.unwrap_or(natural),
        }
    }

    /// Simulated rankers need the list's true order.
    pub fn ranker(&self, oracle: Option<TruthOracle>, natural: PromptStyle) -> anyhow::Result<Box<dyn Ranker>> {
        let style = self.style_for(natural);
        Ok(match self {
            RankerFactory::Simulated { noise, text, .. } => {
                let oracle = oracle.ok_or_else(|| anyhow!("the simulated ranker needs gold orders or qrels"))?;
                let mut ranker = SimulatedRanker::new(oracle, noise.clone());
                ranker.style = style;
                if *text {
                    ranker = ranker.with_text(style);
                }
                Box::new(ranker)
            }
            RankerFactory::Remote { ranker, .. } => Box::new(ranker.with_style(style)),
        })
    }
}

/// One ranked dataset task, as written to `predictions.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    /// 1-based indices into the task's items, best first.
    pub ranking: Ranking,
    pub order: Vec<String>,
    pub objective: u64,
    pub exact: bool,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Tau of each sample's canonical ranking by sample index; `None` if dropped.
    #[serde(default)]
    pub sample_taus: Vec<Option<f64>>,
    pub calls: usize,
    pub dropped: usize,
}

/// A trace line: one sample of one task, or of one window of a query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(flatten)]
    pub sample: RankingSample,
}

pub struct TaskRun {
    pub prediction: Prediction,
    pub samples: Vec<RankingSample>,
}

fn tau_or_none(a: &Ranking, b: &Ranking) -> Option<f64> {
    (a.len() >= 2).then(|| kendall_tau(a, b).expect("equal lengths"))
}

/// Seed of the list at `index`, shared by every grid point of a sweep.
pub fn list_seed(root: u64, index: usize) -> u64 {
    derive_seed(root, index as u64)
}

pub fn rank_task(
    task: &SortTask,
    index: usize,
    factory: &RankerFactory,
    psc: &ResolvedPsc,
    seed: u64,
) -> anyhow::Result<TaskRun> {
    let oracle = TruthOracle::from_gold(&task.items, &task.gold);
    let ranker = factory.ranker(Some(oracle), task.kind.prompt_style())?;
    let config = psc.config(list_seed(seed, index));
    let outcome = psc_rank(&task.items, None, ranker.as_ref(), &config)?;
    let mut sample_taus = vec![None; psc.m];
    for s in &outcome.samples {
        sample_taus[s.index] = tau_or_none(&s.canonical, &task.gold);
    }
    let result = outcome.result;
    Ok(TaskRun {
        prediction: Prediction {
            id: task.id.clone(),
            order: result.ranking.as_slice().iter().map(|&i| task.items.get(i).id.clone()).collect(),
            tau: tau_or_none(&result.ranking, &task.gold),
            ranking: result.ranking,
            objective: result.objective,
            exact: result.exact,
            method: result.method,
            sample_taus,
            calls: outcome.calls,
            dropped: outcome.dropped.len(),
        },
        samples: outcome.samples,
    })
}

/// Rank every task; failures are collected, not propagated.
pub fn rank_tasks(
    tasks: &[SortTask],
    factory: &RankerFactory,
    psc: &ResolvedPsc,
    seed: u64,
) -> (Vec<TaskRun>, Vec<TaskFailure>) {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, task) in tasks.iter().enumerate() {
        match rank_task(task, i, factory, psc, seed) {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::warn!("task {}: {e:#}", task.id);
                failures.push(TaskFailure {
                    id: task.id.clone(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    (runs, failures)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub tasks: usize,
    pub ranked: usize,
    pub failed: usize,
    pub mean_tau: Option<f64>,
    /// Dataset-mean tau of each individual sample run, by sample index.
    pub individual_mean_taus: Vec<f64>,
    /// Median over sample runs of their dataset-mean tau.
    pub median_individual_tau: Option<f64>,
    pub mean_objective: Option<f64>,
    pub calls: usize,
}

pub fn summarize(predictions: &[&Prediction], failed: usize) -> Summary {
    let taus: Vec<f64> = predictions.iter().filter_map(|p| p.tau).collect();
    let runs = predictions.iter().map(|p| p.sample_taus.len()).max().unwrap_or(0);
    let individual_mean_taus: Vec<f64> = (0..runs)
        .filter_map(|i| {
            let v: Vec<f64> = predictions.iter().filter_map(|p| p.sample_taus.get(i).copied().flatten()).collect();
            mean(&v)
        })
        .collect();
    let objectives: Vec<f64> = predictions.iter().map(|p| p.objective as f64).collect();
    Summary {
        tasks: predictions.len() + failed,
        ranked: predictions.len(),
        failed,
        mean_tau: mean(&taus),
        median_individual_tau: median(&individual_mean_taus),
        individual_mean_taus,
        mean_objective: mean(&objectives),
        calls: predictions.iter().map(|p| p.calls).sum(),
    }
}

pub fn summarize_runs(runs: &[TaskRun], failed: usize) -> Summary {
    summarize(&runs.iter().map(|r| &r.prediction).collect::<Vec<_>>(), failed)
}

pub fn trace_rows(runs: &[TaskRun]) -> impl Iterator<Item = TraceRow> + '_ {
    runs.iter().flat_map(|r| {
        r.samples.iter().map(|s| TraceRow {
            task: r.prediction.id.clone(),
            window: None,
            sample: s.clone(),
        })
    })
}

/// First-stage run plus the text needed to rerank it.
pub struct TrecInputs {
    pub run: TrecRun,
    pub corpus: BTreeMap<String, String>,
    pub queries: BTreeMap<String, String>,
    pub qrels: Option<Qrels>,
}

pub struct QueryRun {
    pub qid: String,
    /// Full list: reranked head followed by the untouched tail.
    pub docs: Vec<String>,
    pub windows: Vec<WindowRun>,
    pub calls: usize,
}

/// Truth for simulated rerankers: relevance descending, first-stage order on ties.
pub fn qrels_oracle(docs: &[String], judged: Option<&BTreeMap<String, i32>>) -> TruthOracle {
    let mut order: Vec<(usize, &String)> = docs.iter().enumerate().collect();
    order.sort_by_key(|&(i, d)| (std::cmp::Reverse(judged.and_then(|j| j.get(d)).copied().unwrap_or(0)), i));
    TruthOracle::from_order(order.into_iter().map(|(_, d)| d))
}

pub fn rerank_query(
    qid: &str,
    index: usize,
    inputs: &TrecInputs,
    factory: &RankerFactory,
    psc: &ResolvedPsc,
    depth: usize,
    seed: u64,
) -> anyhow::Result<QueryRun> {
    let all = inputs.run.docs(qid).ok_or_else(|| anyhow!("query {qid} is not in the run"))?;
    let query = inputs
        .queries
        .get(qid)
        .ok_or_else(|| anyhow!("query {qid} has no text"))?;
    let head: Vec<String> = all.iter().take(depth).map(|d| d.to_string()).collect();
    if head.is_empty() {
        bail!("query {qid} has an empty candidate list");
    }
    let items = head
        .iter()
        .map(|d| {
            let text = inputs.corpus.get(d).with_context(|| format!("document {d} is not in the corpus"))?;
            Ok(Item::new(d.clone(), text.clone()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let items = ItemList::new(items)?;
    let oracle = match (factory, &inputs.qrels) {
        (RankerFactory::Simulated { .. }, Some(qrels)) => Some(qrels_oracle(&head, qrels.get(qid))),
        _ => None,
    };
    let ranker = factory.ranker(oracle, PromptStyle::RankGpt)?;
    let config = psc.config(list_seed(seed, index));
    let outcome = windowed_rerank(&items, Some(query), ranker.as_ref(), &config, psc.window, psc.stride)?;
    let mut docs: Vec<String> = outcome.ranking.as_slice().iter().map(|&i| head[i].clone()).collect();
    docs.extend(all.iter().skip(depth).map(|d| d.to_string()));
    Ok(QueryRun {
        qid: qid.to_string(),
        docs,
        windows: outcome.windows,
        calls: outcome.calls,
    })
}

pub fn rerank_run(
    inputs: &TrecInputs,
    factory: &RankerFactory,
    psc: &ResolvedPsc,
    depth: usize,
    seed: u64,
) -> (Vec<QueryRun>, Vec<TaskFailure>) {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, qid) in inputs.run.queries.keys().enumerate() {
        match rerank_query(qid, i, inputs, factory, psc, depth, seed) {
            Ok(r) => runs.push(r),
            Err(e) => {
                log::warn!("query {qid}: {e:#}");
                failures.push(TaskFailure {
                    id: qid.clone(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    (runs, failures)
}

pub fn query_trace_rows(runs: &[QueryRun]) -> impl Iterator<Item = TraceRow> + '_ {
    runs.iter().flat_map(|q| {
        q.windows.iter().enumerate().flat_map(move |(w, win)| {
            win.outcome.samples.iter().map(move |s| TraceRow {
                task: q.qid.clone(),
                window: Some(w),
                sample: s.clone(),
            })
        })
    })
}
