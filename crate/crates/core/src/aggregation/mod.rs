//! Central rankings of a sample of rankings.

mod baselines;
mod kemeny;
mod preference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{borda, rank_sums, rrf, rrf_as, rrf_scores, rrf_scores_as, DEFAULT_RRF_K};
pub use kemeny::{kemeny_exact, kemeny_exact_with_limit, kemeny_solve, Budget, DEFAULT_EXACT_LIMIT};
pub use preference::PreferenceMatrix;

use crate::ranking::{kendall_distance, Ranking, RankingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("cannot aggregate an empty sample set")]
    EmptySamples,
    #[error("samples disagree on size: expected {expected}, found {found}")]
    MixedSizes { expected: usize, found: usize },
    #[error("n = {n} exceeds the exact solver limit of {limit}; use kemeny_solve with a budget")]
    AboveExactLimit { n: usize, limit: usize },
    #[error("rrf constant k must be positive, got {0}")]
    InvalidK(f64),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    KemenyExact,
    KemenyBudgeted,
    Borda,
    Rrf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub ranking: Ranking,
    /// Summed Kendall distance from `ranking` to every sample.
    pub objective: u64,
    /// Whether `ranking` is certified Kemeny-optimal.
    pub exact: bool,
    pub method: Method,
}

/// `Σ_i d(sample_i, ranking)`.
pub fn objective(ranking: &Ranking, samples: &[Ranking]) -> Result<u64, AggregationError> {
    samples
        .iter()
        .map(|s| kendall_distance(s, ranking).map_err(AggregationError::from))
        .sum()
}

/// Aggregation strategy as configured by callers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregator {
    /// Subset DP up to `exact_limit`, budgeted branch-and-bound above it.
    Kemeny { exact_limit: usize, budget: Budget },
    Borda,
    Rrf { k: f64 },
}

impl Default for Aggregator {
    fn default() -> Self {
        Aggregator::kemeny()
    }
}

impl Aggregator {
    pub fn kemeny() -> Self {
        Aggregator::Kemeny {
            exact_limit: DEFAULT_EXACT_LIMIT,
            budget: Budget::default(),
        }
    }

    pub fn rrf() -> Self {
        Aggregator::Rrf { k: DEFAULT_RRF_K }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Aggregator::Kemeny { .. } => "kemeny",
            Aggregator::Borda => "borda",
            Aggregator::Rrf { .. } => "rrf",
        }
    }

    pub fn aggregate(&self, samples: &[Ranking]) -> Result<AggregationResult, AggregationError> {
        match *self {
            Aggregator::Kemeny { exact_limit, budget } => {
                let matrix = PreferenceMatrix::build(samples)?;
                if matrix.n() <= exact_limit.min(kemeny::SUBSET_SOLVER_CEILING) {
                    Ok(kemeny::exact_from_matrix(&matrix))
                } else {
                    Ok(kemeny_solve(&matrix, budget))
                }
            }
            Aggregator::Borda => borda(samples),
            Aggregator::Rrf { k } => rrf(samples, k),
        }
    }
}
