//! Permutation self-consistency for listwise rankers.
//!
//! Shuffle the input list, ask a ranker to order each shuffle, map every
//! answer back to item space and aggregate the samples into one ranking.

pub mod aggregation;
pub mod bias;
pub mod datasets;
pub mod noise;
pub mod pipeline;
pub mod ranker;
pub mod ranking;
pub mod rng;
pub mod scalar;
pub mod stats;

/// Default floating-point scalar.
pub type Real = f64;
/// Exact scalar for oracle comparisons.
pub type Rational = num_rational::Ratio<i64>;

pub use aggregation::{Aggregator, AggregationError, AggregationResult, Method};
pub use bias::{count_reversions, normalize_matrix, uniformity_test, ReversionMatrix, UniformityTest};
pub use noise::{NoiseModel, WindowMode};
pub use pipeline::{psc_rank, windowed_rerank, OnUnparseable, PscConfig, PscOutcome, RankingSample};
pub use ranker::{PromptStyle, Ranker, RankRequest, RankerOutput, SimulatedRanker};
pub use ranking::{kendall_distance, kendall_tau, Item, ItemList, Ranking, RankingError};
pub use scalar::{RealScalar, Scalar};
