//! Shuffle–aggregate decoding and its sliding-window variant.
//!
//! Every sample presents the items under a fresh uniform shuffle `π`, reads
//! the ranker's answer `σ̂` over presented positions, and maps it back to item
//! identities as `π ∘ σ̂` before aggregation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{AggregationError, AggregationResult, Aggregator};
use crate::ranker::{parse_ranking_output, RankRequest, Ranker, RankerError, RankerOutput};
use crate::ranking::{random_ranking, ItemList, Ranking, RankingError};
use crate::rng::{derive_seed, seeded_rng};

pub const DEFAULT_M: usize = 20;
pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_STRIDE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnUnparseable {
    /// Redraw the shuffle and call the ranker once more.
    ResampleOnce,
    /// Aggregate whatever samples did parse.
    #[default]
    DropSample,
    /// Abort the run on the first unparseable output.
    Fail,
}

/// Index space in which shuffles are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShuffleSpace {
    /// Shuffles index the list as given.
    #[default]
    Presented,
    /// Shuffles index the items sorted by id, so the result cannot depend on
    /// the order the caller supplied them in.
    ItemIdentity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PscConfig {
    pub m: usize,
    pub aggregator: Aggregator,
    pub seed: u64,
    pub on_unparseable: OnUnparseable,
    pub shuffle_space: ShuffleSpace,
    /// Cap on concurrent ranker calls, on top of the ranker's own cap.
    pub workers: Option<usize>,
}

impl Default for PscConfig {
    fn default() -> Self {
        PscConfig {
            m: DEFAULT_M,
            aggregator: Aggregator::kemeny(),
            seed: 0,
            on_unparseable: OnUnparseable::default(),
            shuffle_space: ShuffleSpace::default(),
            workers: None,
        }
    }
}

impl PscConfig {
    pub fn with_m(m: usize, seed: u64) -> Self {
        PscConfig {
            m,
            seed,
            ..PscConfig::default()
        }
    }
}

/// One shuffled-prompt observation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingSample {
    pub index: usize,
    /// `π`: presented position `p` shows item `shuffle(p)`.
    pub shuffle: Ranking,
    /// `σ̂` over presented positions.
    pub raw_output: Ranking,
    /// `π ∘ σ̂` over item indices.
    pub canonical: Ranking,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

impl RankingSample {
    pub fn new(index: usize, shuffle: Ranking, raw_output: Ranking) -> Result<Self, RankingError> {
        let canonical = shuffle.compose(&raw_output)?;
        Ok(RankingSample {
            index,
            shuffle,
            raw_output,
            canonical,
            raw_text: None,
        })
    }

    pub fn is_consistent(&self) -> bool {
        self.shuffle.compose(&self.raw_output).ok().as_ref() == Some(&self.canonical)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub attempts: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PscOutcome {
    pub result: AggregationResult,
    /// Usable samples in index order.
    pub samples: Vec<RankingSample>,
    pub dropped: Vec<SampleFailure>,
    /// Ranker invocations, including resamples.
    pub calls: usize,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot rank an empty item list")]
    EmptyItems,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample {index} was unparseable: {error}")]
    Unparseable { index: usize, error: String },
    #[error("all {m} samples were unparseable")]
    AllSamplesFailed { m: usize },
    #[error("ranker returned a ranking of {found} items for a list of {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

enum Drawn {
    Sample(RankingSample, usize),
    Failed(SampleFailure),
}

/// The shuffle and ranker seed of sample `index` on try `attempt`.
fn sample_seeds(seed: u64, index: usize, attempt: usize, n: usize) -> (Ranking, u64) {
    let base = derive_seed(seed, ((index as u64) << 1) | attempt as u64);
    let shuffle = random_ranking(n, &mut seeded_rng(base)).expect("n >= 1");
    (shuffle, derive_seed(base, 0x5eed))
}

fn draw<R: Ranker + ?Sized>(
    items: &ItemList,
    query: Option<&str>,
    ranker: &R,
    config: &PscConfig,
    index: usize,
) -> Result<Drawn, PipelineError> {
    let n = items.len();
    let attempts = match config.on_unparseable {
        OnUnparseable::ResampleOnce => 2,
        _ => 1,
    };
    let mut last_error = String::new();
    for attempt in 0..attempts {
        let (shuffle, call_seed) = sample_seeds(config.seed, index, attempt, n);
        let presented = items.apply(&shuffle).expect("shuffle has the list's length");
        let request = RankRequest {
            items: &presented,
            query,
            seed: call_seed,
        };
        let (raw, text) = match ranker.rank(&request)? {
            RankerOutput::Ranking(r) => (Ok(r), None),
            RankerOutput::Text(t) => (parse_ranking_output(&t, &presented, ranker.style()), Some(t)),
        };
        match raw {
            Ok(raw) if raw.len() != n => {
                return Err(PipelineError::WrongLength {
                    expected: n,
                    found: raw.len(),
                })
            }
            Ok(raw) => {
                let mut sample = RankingSample::new(index, shuffle, raw).expect("lengths checked");
                sample.raw_text = text;
                return Ok(Drawn::Sample(sample, attempt + 1));
            }
            Err(e) => {
                if config.on_unparseable == OnUnparseable::Fail {
                    return Err(PipelineError::Unparseable {
                        index,
                        error: e.to_string(),
                    });
                }
                last_error = e.to_string();
            }
        }
    }
    Ok(Drawn::Failed(SampleFailure {
        index,
        attempts,
        error: last_error,
    }))
}

/// Rank `items` by permutation self-consistency.
pub fn psc_rank<R: Ranker + ?Sized>(
    items: &ItemList,
    query: Option<&str>,
    ranker: &R,
    config: &PscConfig,
) -> Result<PscOutcome, PipelineError> {
    if items.is_empty() {
        return Err(PipelineError::EmptyItems);
    }
    if config.m == 0 {
        return Err(PipelineError::InvalidConfig("m must be at least 1".into()));
    }
    match config.shuffle_space {
        ShuffleSpace::Presented => psc_rank_presented(items, query, ranker, config),
        ShuffleSpace::ItemIdentity => {
            let mut by_id: Vec<usize> = (0..items.len()).collect();
            by_id.sort_by(|&a, &b| items.get(a).id.cmp(&items.get(b).id));
            let to_input = Ranking::from_zero_based(by_id).expect("sorted indices form a permutation");
            let sorted = items.apply(&to_input).expect("same length");
            let mut outcome = psc_rank_presented(&sorted, query, ranker, config)?;
            let relabel = |r: &Ranking| to_input.compose(r).expect("same length");
            outcome.result.ranking = relabel(&outcome.result.ranking);
            for s in &mut outcome.samples {
                s.shuffle = relabel(&s.shuffle);
                s.canonical = relabel(&s.canonical);
            }
            Ok(outcome)
        }
    }
}

fn psc_rank_presented<R: Ranker + ?Sized>(
    items: &ItemList,
    query: Option<&str>,
    ranker: &R,
    config: &PscConfig,
) -> Result<PscOutcome, PipelineError> {
    let m = config.m;
    let workers = m
        .min(ranker.max_in_flight().max(1))
        .min(config.workers.unwrap_or(usize::MAX).max(1));
    let slots: Vec<Mutex<Option<Result<Drawn, PipelineError>>>> = (0..m).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let index = next.fetch_add(1, Ordering::Relaxed);
        if index >= m {
            break;
        }
        let drawn = draw(items, query, ranker, config, index);
        *slots[index].lock().unwrap() = Some(drawn);
    };
    if workers == 1 {
        work();
    } else {
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut samples = Vec::with_capacity(m);
    let mut dropped = Vec::new();
    let mut calls = 0;
    for slot in slots {
        match slot.into_inner().unwrap().expect("every index is drawn")? {
            Drawn::Sample(sample, attempts) => {
                calls += attempts;
                samples.push(sample);
            }
            Drawn::Failed(failure) => {
                calls += failure.attempts;
                dropped.push(failure);
            }
        }
    }
    if samples.is_empty() {
        return Err(PipelineError::AllSamplesFailed { m });
    }
    let canonical: Vec<Ranking> = samples.iter().map(|s| s.canonical.clone()).collect();
    let result = config.aggregator.aggregate(&canonical)?;
    Ok(PscOutcome {
        result,
        samples,
        dropped,
        calls,
    })
}

/// Per-window record of a sliding-window run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRun {
    /// 0-based half-open span of the working list.
    pub start: usize,
    pub end: usize,
    /// Item indices in the window, in working-list order before reranking.
    pub items: Vec<usize>,
    pub outcome: PscOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedOutcome {
    pub ranking: Ranking,
    pub windows: Vec<WindowRun>,
    pub calls: usize,
}

/// Spans visited by a back-to-front pass with `window` and `stride` over `n`.
///
/// The last span is cut at the list head, so every position is covered.
/// A window longer than the list is clamped to the list.
pub fn window_spans(n: usize, window: usize, stride: usize) -> Result<Vec<(usize, usize)>, PipelineError> {
    if window == 0 || stride == 0 || stride > window {
        return Err(PipelineError::InvalidConfig(format!(
            "need 1 <= stride <= window, got window {window}, stride {stride}"
        )));
    }
    let window = window.min(n);
    let mut spans = Vec::new();
    let mut end = n;
    loop {
        let start = end.saturating_sub(window);
        spans.push((start, end));
        if start == 0 {
            break;
        }
        end -= stride;
    }
    Ok(spans)
}

/// Rerank a long list by PSC over sliding windows from the back to the front.
///
/// Window `k` uses seed `derive_seed(config.seed, k)`, except that the first
/// window uses `config.seed` itself so a single covering window reproduces
/// [`psc_rank`] exactly.
pub fn windowed_rerank<R: Ranker + ?Sized>(
    items: &ItemList,
    query: Option<&str>,
    ranker: &R,
    config: &PscConfig,
    window: usize,
    stride: usize,
) -> Result<WindowedOutcome, PipelineError> {
    if items.is_empty() {
        return Err(PipelineError::EmptyItems);
    }
    let spans = window_spans(items.len(), window, stride)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut windows = Vec::with_capacity(spans.len());
    let mut calls = 0;
    for (k, (start, end)) in spans.into_iter().enumerate() {
        let members = order[start..end].to_vec();
        let sub = ItemList::new(members.iter().map(|&i| items.get(i).clone()).collect())
            .expect("ids are unique in the source list");
        let cfg = PscConfig {
            seed: if k == 0 { config.seed } else { derive_seed(config.seed, k as u64) },
            ..config.clone()
        };
        let outcome = psc_rank(&sub, query, ranker, &cfg)?;
        for (offset, &local) in outcome.result.ranking.as_slice().iter().enumerate() {
            order[start + offset] = members[local];
        }
        calls += outcome.calls;
        windows.push(WindowRun {
            start,
            end,
            items: members,
            outcome,
        });
    }
    Ok(WindowedOutcome {
        ranking: Ranking::from_zero_based(order).expect("windows permute in place"),
        windows,
        calls,
    })
}
