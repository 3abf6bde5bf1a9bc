use serde::{Deserialize, Serialize};

use super::AggregationError;
use crate::ranking::Ranking;

/// Pairwise vote counts: `votes(i, j)` samples place item `i` strictly before `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    n: usize,
    samples: u64,
    w: Vec<u64>,
}

impl PreferenceMatrix {
    pub fn build(samples: &[Ranking]) -> Result<Self, AggregationError> {
        let n = check_samples(samples)?;
        let mut w = vec![0u64; n * n];
        for s in samples {
            let order = s.as_slice();
            for (p, &a) in order.iter().enumerate() {
                for &b in &order[p + 1..] {
                    w[a * n + b] += 1;
                }
            }
        }
        Ok(PreferenceMatrix {
            n,
            samples: samples.len() as u64,
            w,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rankings that were counted.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn votes(&self, i: usize, j: usize) -> u64 {
        self.w[i * self.n + j]
    }

    /// Sum of Kendall distances from `ranking` to every counted sample.
    pub fn objective(&self, ranking: &Ranking) -> u64 {
        let order = ranking.as_slice();
        let mut total = 0;
        for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                total += self.votes(b, a);
            }
        }
        total
    }

    /// `Σ_{i<j} min(w[i][j], w[j][i])`, a lower bound on any ranking's objective.
    pub fn pairwise_lower_bound(&self) -> u64 {
        let mut total = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                total += self.votes(i, j).min(self.votes(j, i));
            }
        }
        total
    }
}

pub(crate) fn check_samples(samples: &[Ranking]) -> Result<usize, AggregationError> {
    let first = samples.first().ok_or(AggregationError::EmptySamples)?;
    let n = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(AggregationError::MixedSizes {
            expected: n,
            found: bad.len(),
        });
    }
    Ok(n)
}
