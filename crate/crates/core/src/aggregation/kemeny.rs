//! Kemeny–Young central rankings.
//!
//! Both solvers work on the [`PreferenceMatrix`]: placing item `a` before `b`
//! costs `w[b][a]`, so the summed Kendall distance decomposes over pairs.
//! Among co-optimal rankings both return the lexicographically smallest.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::baselines::borda_from_matrix;
use super::preference::PreferenceMatrix;
use super::{AggregationError, AggregationResult, Method};
use crate::ranking::Ranking;

pub const DEFAULT_EXACT_LIMIT: usize = 12;

/// Largest `n` the subset solver accepts regardless of the configured limit.
pub(crate) const SUBSET_SOLVER_CEILING: usize = 24;

/// Search budget for [`kemeny_solve`]. `None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_nodes: Option<u64>,
    #[serde(with = "duration_ms")]
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: Some(50_000_000),
            max_time: None,
        }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            max_nodes: None,
            max_time: None,
        }
    }

    pub fn nodes(max_nodes: u64) -> Self {
        Budget {
            max_nodes: Some(max_nodes),
            max_time: None,
        }
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        d.map(|d| d.as_millis() as u64).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

/// Exact Kemeny ranking by dynamic programming over placed-item subsets,
/// refusing inputs larger than [`DEFAULT_EXACT_LIMIT`].
pub fn kemeny_exact(samples: &[Ranking]) -> Result<AggregationResult, AggregationError> {
    kemeny_exact_with_limit(samples, DEFAULT_EXACT_LIMIT)
}

pub fn kemeny_exact_with_limit(
    samples: &[Ranking],
    exact_limit: usize,
) -> Result<AggregationResult, AggregationError> {
    let matrix = PreferenceMatrix::build(samples)?;
    let limit = exact_limit.min(SUBSET_SOLVER_CEILING);
    if matrix.n() > limit {
        return Err(AggregationError::AboveExactLimit {
            n: matrix.n(),
            limit,
        });
    }
    Ok(exact_from_matrix(&matrix))
}

pub(crate) fn exact_from_matrix(matrix: &PreferenceMatrix) -> AggregationResult {
    let ranking = subset_dp(matrix);
    AggregationResult {
        objective: matrix.objective(&ranking),
        ranking,
        exact: true,
        method: Method::KemenyExact,
    }
}

/// `best[S]` is the cheapest way to order the items outside `S` after the
/// items of `S` have been placed. Choosing `x` next costs `Σ_{y unplaced} w[y][x]`.
fn subset_dp(matrix: &PreferenceMatrix) -> Ranking {
    let n = matrix.n();
    let full: usize = (1 << n) - 1;
    let mut best = vec![u64::MAX; 1 << n];
    best[full] = 0;
    let step_cost = |placed: usize, x: usize| -> u64 {
        (0..n)
            .filter(|&y| y != x && placed & (1 << y) == 0)
            .map(|y| matrix.votes(y, x))
            .sum()
    };
    for placed in (0..full).rev() {
        let mut value = u64::MAX;
        for x in 0..n {
            if placed & (1 << x) == 0 {
                value = value.min(step_cost(placed, x) + best[placed | (1 << x)]);
            }
        }
        best[placed] = value;
    }
    let mut order = Vec::with_capacity(n);
    let mut placed = 0usize;
    while placed != full {
        let next = (0..n)
            .find(|&x| {
                placed & (1 << x) == 0 && step_cost(placed, x) + best[placed | (1 << x)] == best[placed]
            })
            .expect("an optimal continuation exists");
        order.push(next);
        placed |= 1 << next;
    }
    Ranking::from_zero_based(order).expect("dp emits a permutation")
}

/// Branch-and-bound over ranking prefixes, seeded with the locally improved
/// Borda ranking. Undecided pairs contribute `min(w[i][j], w[j][i])` to the
/// bound. When the budget runs out the best incumbent is returned after
/// adjacent-transposition descent and `exact` is false.
pub fn kemeny_solve(matrix: &PreferenceMatrix, budget: Budget) -> AggregationResult {
    let n = matrix.n();
    let mut incumbent = borda_from_matrix(matrix);
    local_search(matrix, &mut incumbent);
    let incumbent_cost = objective_of(matrix, &incumbent);

    let mut search = Search {
        matrix,
        n,
        placed: vec![false; n],
        prefix: Vec::with_capacity(n),
        best: incumbent,
        best_cost: incumbent_cost,
        nodes: 0,
        budget,
        started: Instant::now(),
        exhausted: false,
    };
    // The incumbent may already be optimal, but a lexicographically smaller
    // co-optimum can only be ruled out by searching.
    search.descend(0, matrix.pairwise_lower_bound());
    let exhausted = search.exhausted;
    let mut order = search.best;
    if exhausted {
        local_search(matrix, &mut order);
    }
    let ranking = Ranking::from_zero_based(order).expect("search emits a permutation");
    AggregationResult {
        objective: matrix.objective(&ranking),
        ranking,
        exact: !exhausted,
        method: if exhausted {
            Method::KemenyBudgeted
        } else {
            Method::KemenyExact
        },
    }
}

struct Search<'a> {
    matrix: &'a PreferenceMatrix,
    n: usize,
    placed: Vec<bool>,
    prefix: Vec<usize>,
    best: Vec<usize>,
    best_cost: u64,
    nodes: u64,
    budget: Budget,
    started: Instant,
    exhausted: bool,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if self.exhausted {
            return true;
        }
        self.nodes += 1;
        if let Some(max) = self.budget.max_nodes {
            if self.nodes > max {
                self.exhausted = true;
            }
        }
        if let Some(limit) = self.budget.max_time {
            if self.nodes.is_multiple_of(4096) && self.started.elapsed() > limit {
                self.exhausted = true;
            }
        }
        self.exhausted
    }

    /// True unless the prefix is already lexicographically larger than the incumbent.
    fn may_precede_incumbent(&self) -> bool {
        for (p, b) in self.prefix.iter().zip(&self.best) {
            if p != b {
                return p < b;
            }
        }
        true
    }

    /// `cost` counts every pair with at least one placed item; `bound` is the
    /// pairwise minimum over pairs of unplaced items.
    fn descend(&mut self, cost: u64, bound: u64) {
        if self.out_of_budget() {
            return;
        }
        if self.prefix.len() == self.n {
            if cost < self.best_cost || (cost == self.best_cost && self.prefix < self.best) {
                self.best_cost = cost;
                self.best.clone_from(&self.prefix);
            }
            return;
        }
        for x in 0..self.n {
            if self.placed[x] {
                continue;
            }
            let mut step = 0;
            let mut released = 0;
            for y in 0..self.n {
                if y != x && !self.placed[y] {
                    let (xy, yx) = (self.matrix.votes(x, y), self.matrix.votes(y, x));
                    step += yx;
                    released += xy.min(yx);
                }
            }
            let child_cost = cost + step;
            let child_bound = bound - released;
            let lower = child_cost + child_bound;
            if lower > self.best_cost {
                continue;
            }
            self.prefix.push(x);
            self.placed[x] = true;
            if lower < self.best_cost || self.may_precede_incumbent() {
                self.descend(child_cost, child_bound);
            }
            self.placed[x] = false;
            self.prefix.pop();
            if self.exhausted {
                return;
            }
        }
    }
}

fn objective_of(matrix: &PreferenceMatrix, order: &[usize]) -> u64 {
    let mut total = 0;
    for (p, &a) in order.iter().enumerate() {
        for &b in &order[p + 1..] {
            total += matrix.votes(b, a);
        }
    }
    total
}

/// Swap adjacent items while any swap strictly lowers the objective.
pub(crate) fn local_search(matrix: &PreferenceMatrix, order: &mut [usize]) {
    let mut improved = true;
    while improved {
        improved = false;
        for p in 0..order.len().saturating_sub(1) {
            let (a, b) = (order[p], order[p + 1]);
            if matrix.votes(b, a) > matrix.votes(a, b) {
                order.swap(p, p + 1);
                improved = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::random_ranking;
    use crate::rng::seeded_rng;

    fn r(v: &[usize]) -> Ranking {
        Ranking::from_one_based(v).unwrap()
    }

    /// Factorial oracle, lexicographic enumeration so the first minimum wins.
    fn brute_force(samples: &[Ranking]) -> (Ranking, u64) {
        let n = samples[0].len();
        let mut best: Option<(Ranking, u64)> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let cand = Ranking::from_zero_based(perm.clone()).unwrap();
            let cost: u64 = samples
                .iter()
                .map(|s| crate::ranking::kendall_distance(s, &cand).unwrap())
                .sum();
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some((cand, cost));
            }
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        best.unwrap()
    }

    #[test]
    fn single_sample_is_its_own_center() {
        let s = r(&[3, 1, 4, 2]);
        let res = kemeny_exact(std::slice::from_ref(&s)).unwrap();
        assert_eq!((res.ranking, res.objective, res.exact), (s, 0, true));
    }

    #[test]
    fn exact_examples() {
        let samples = [r(&[1, 2, 3]), r(&[1, 2, 3]), r(&[2, 1, 3])];
        assert_eq!(brute_force(&samples), (r(&[1, 2, 3]), 1));
        let res = kemeny_exact(&samples).unwrap();
        assert_eq!((res.ranking, res.objective), (r(&[1, 2, 3]), 1));

        let tie = [r(&[1, 2]), r(&[2, 1])];
        assert_eq!(brute_force(&tie), (r(&[1, 2]), 1));
        let res = kemeny_exact(&tie).unwrap();
        assert_eq!((res.ranking, res.objective), (r(&[1, 2]), 1));
    }

    #[test]
    fn exact_refuses_large_inputs() {
        let s = Ranking::identity(13);
        assert!(matches!(
            kemeny_exact(&[s]),
            Err(AggregationError::AboveExactLimit { n: 13, limit: 12 })
        ));
    }

    #[test]
    fn unanimous_matrix_is_solved_exactly() {
        let s = r(&[5, 2, 7, 1, 3, 6, 4]);
        let m = PreferenceMatrix::build(&vec![s.clone(); 4]).unwrap();
        let res = kemeny_solve(&m, Budget::default());
        assert_eq!((res.ranking, res.objective, res.exact), (s, 0, true));
    }

    #[test]
    fn solvers_agree_with_brute_force() {
        let mut rng = seeded_rng(99);
        for trial in 0..150 {
            let n = 2 + trial % 6;
            let m = 1 + trial % 10;
            let samples: Vec<Ranking> = (0..m).map(|_| random_ranking(n, &mut rng).unwrap()).collect();
            let (oracle, cost) = brute_force(&samples);
            let exact = kemeny_exact(&samples).unwrap();
            let solved = kemeny_solve(&PreferenceMatrix::build(&samples).unwrap(), Budget::unlimited());
            assert_eq!((&exact.ranking, exact.objective), (&oracle, cost), "{samples:?}");
            assert_eq!((&solved.ranking, solved.objective), (&oracle, cost), "{samples:?}");
            assert!(solved.exact);
        }
    }

    #[test]
    fn tiny_budget_returns_local_optimum() {
        let mut rng = seeded_rng(5);
        let samples: Vec<Ranking> = (0..9).map(|_| random_ranking(14, &mut rng).unwrap()).collect();
        let m = PreferenceMatrix::build(&samples).unwrap();
        let res = kemeny_solve(&m, Budget::nodes(10));
        assert!(!res.exact);
        assert_eq!(res.method, Method::KemenyBudgeted);
        let order = res.ranking.as_slice();
        for p in 0..order.len() - 1 {
            assert!(m.votes(order[p + 1], order[p]) <= m.votes(order[p], order[p + 1]));
        }
        let borda = borda_from_matrix(&m);
        assert!(res.objective <= objective_of(&m, &borda));
    }
}
