//! Positional baselines: Borda rank sums and reciprocal rank fusion.

use std::cmp::Ordering;

use super::preference::{check_samples, PreferenceMatrix};
use super::{objective, AggregationError, AggregationResult, Method};
use crate::ranking::Ranking;
use crate::scalar::Scalar;

pub const DEFAULT_RRF_K: f64 = 60.0;

/// Sum of 1-based positions of every item across the samples.
pub fn rank_sums(samples: &[Ranking]) -> Result<Vec<u64>, AggregationError> {
    let n = check_samples(samples)?;
    let mut sums = vec![0u64; n];
    for s in samples {
        for (p, &item) in s.as_slice().iter().enumerate() {
            sums[item] += p as u64 + 1;
        }
    }
    Ok(sums)
}

/// Items by ascending rank sum; ties go to the lower item index.
pub fn borda(samples: &[Ranking]) -> Result<AggregationResult, AggregationError> {
    let sums = rank_sums(samples)?;
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by_key(|&i| (sums[i], i));
    finish(order, samples, Method::Borda)
}

/// Borda order recovered from pairwise counts: an item's rank sum is
/// `m + Σ_y w[y][x]`, so sorting by losses gives the same ranking.
pub(crate) fn borda_from_matrix(matrix: &PreferenceMatrix) -> Vec<usize> {
    let n = matrix.n();
    let losses: Vec<u64> = (0..n).map(|x| (0..n).map(|y| matrix.votes(y, x)).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (losses[i], i));
    order
}

/// `RRFScore(j) = Σ_i 1 / (k + rank_i(j))` with 1-based ranks.
///
/// Each item's terms are summed smallest first, so items with the same
/// multiset of ranks get bit-identical scores whatever the sample order.
pub fn rrf_scores_as<T: Scalar>(samples: &[Ranking], k: T) -> Result<Vec<T>, AggregationError> {
    let n = check_samples(samples)?;
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(k > T::zero()) {
        return Err(AggregationError::InvalidK(k.to_f64()));
    }
    let mut ranks: Vec<Vec<u64>> = vec![Vec::with_capacity(samples.len()); n];
    for s in samples {
        for (p, &item) in s.as_slice().iter().enumerate() {
            ranks[item].push(p as u64 + 1);
        }
    }
    Ok(ranks
        .into_iter()
        .map(|mut r| {
            r.sort_unstable_by(|a, b| b.cmp(a));
            r.into_iter()
                .fold(T::zero(), |acc, rank| acc + T::one() / (k + T::from_count(rank)))
        })
        .collect())
}

pub fn rrf_scores(samples: &[Ranking], k: f64) -> Result<Vec<f64>, AggregationError> {
    rrf_scores_as(samples, k)
}

/// Items by descending fusion score; ties go to the lower item index.
pub fn rrf_as<T: Scalar>(samples: &[Ranking], k: T) -> Result<AggregationResult, AggregationError> {
    let scores = rrf_scores_as(samples, k)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    finish(order, samples, Method::Rrf)
}

pub fn rrf(samples: &[Ranking], k: f64) -> Result<AggregationResult, AggregationError> {
    rrf_as(samples, k)
}

fn finish(
    order: Vec<usize>,
    samples: &[Ranking],
    method: Method,
) -> Result<AggregationResult, AggregationError> {
    let ranking = Ranking::from_zero_based(order).expect("sorted indices form a permutation");
    Ok(AggregationResult {
        objective: objective(&ranking, samples)?,
        ranking,
        exact: false,
        method,
    })
}
