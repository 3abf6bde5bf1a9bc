//! Generative models of noisy rankers and the Monte-Carlo convergence harness.
//!
//! Two corruption families are supported:
//!
//! * **concordant-subset**: a uniform random permutation in which a random,
//!   nonempty subset `S′` of items is forced into the true relative order.
//!   Items outside `S′` stay uniformly scrambled.
//! * **positional-window**: the true order with output positions `lo..=hi`
//!   (1-based) shuffled uniformly, a "lost in the middle" corruption. The
//!   window can instead be reversed or left in place, which matters once the
//!   window is read in input-order space by the simulated ranker.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{AggregationError, Aggregator};
use crate::ranking::{kendall_tau, random_ranking, Ranking, RankingError};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("scramble window [{lo}, {hi}] is empty or outside 1..={n}")]
    EmptyWindow { lo: usize, hi: usize, n: usize },
    #[error("invalid subset size distribution: {0}")]
    InvalidSubsetDistribution(String),
    #[error("invalid sample-count grid: {0}")]
    InvalidGrid(String),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

/// Distribution of the guaranteed-concordant subset `S′`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum SubsetSize {
    /// Uniform over all nonempty subsets.
    #[default]
    Uniform,
    /// Every item is concordant; draws equal the truth.
    All,
    /// Uniform over subsets of exactly this size.
    Fixed(usize),
    /// `weights[k-1]` is the relative probability of size `k`, subset uniform given size.
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    ConcordantSubset {
        #[serde(default)]
        subset: SubsetSize,
    },
    /// 1-based inclusive window of positions to scramble.
    PositionalWindow {
        lo: usize,
        hi: usize,
        #[serde(default)]
        mode: WindowMode,
    },
}

/// What happens to the items inside a positional window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// Uniform shuffle.
    #[default]
    Shuffle,
    /// Reverse the order the window items arrived in.
    Reverse,
    /// Keep the window items in the order they arrived.
    Echo,
}

impl WindowMode {
    pub(crate) fn scramble<T, R: Rng + ?Sized>(self, values: &mut [T], rng: &mut R) {
        match self {
            WindowMode::Shuffle => shuffle_slice(values, rng),
            WindowMode::Reverse => values.reverse(),
            WindowMode::Echo => {}
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ConcordantSubset {
            subset: SubsetSize::Uniform,
        }
    }
}

impl NoiseModel {
    pub fn window(lo: usize, hi: usize) -> Self {
        NoiseModel::PositionalWindow {
            lo,
            hi,
            mode: WindowMode::Shuffle,
        }
    }

    pub fn noiseless() -> Self {
        NoiseModel::ConcordantSubset {
            subset: SubsetSize::All,
        }
    }

    /// Check the model's parameters against list size `n`.
    pub fn validate(&self, n: usize) -> Result<(), NoiseError> {
        match self {
            NoiseModel::PositionalWindow { lo, hi, .. } => window_range(*lo, *hi, n).map(|_| ()),
            NoiseModel::ConcordantSubset { subset } => match subset {
                SubsetSize::Uniform | SubsetSize::All => Ok(()),
                SubsetSize::Fixed(k) if (1..=n).contains(k) => Ok(()),
                SubsetSize::Fixed(k) => Err(NoiseError::InvalidSubsetDistribution(format!(
                    "fixed size {k} outside 1..={n}"
                ))),
                SubsetSize::Weights(w) => {
                    if w.len() != n {
                        Err(NoiseError::InvalidSubsetDistribution(format!(
                            "{} weights for n = {n}",
                            w.len()
                        )))
                    } else if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                        Err(NoiseError::InvalidSubsetDistribution(
                            "weights must be non-negative with positive sum".into(),
                        ))
                    } else {
                        Ok(())
                    }
                }
            },
        }
    }
}

/// 0-based half-open range of a 1-based inclusive window.
pub(crate) fn window_range(lo: usize, hi: usize, n: usize) -> Result<std::ops::Range<usize>, NoiseError> {
    if lo == 0 || lo > hi || hi > n {
        return Err(NoiseError::EmptyWindow { lo, hi, n });
    }
    Ok(lo - 1..hi)
}

/// One noisy observation, with the concordant subset when the model has one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyDraw {
    pub ranking: Ranking,
    /// 0-based item indices of `S′`.
    pub concordant: Option<Vec<usize>>,
}

pub fn sample_noisy_ranking<R: Rng + ?Sized>(
    truth: &Ranking,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<NoisyDraw, NoiseError> {
    let n = truth.len();
    model.validate(n)?;
    match model {
        NoiseModel::ConcordantSubset { subset } => {
            let members = draw_subset(subset, n, rng);
            let ranking = impose_concordance(truth, &random_ranking(n, rng)?, &members);
            let concordant = (0..n).filter(|&i| members[i]).collect();
            Ok(NoisyDraw {
                ranking,
                concordant: Some(concordant),
            })
        }
        NoiseModel::PositionalWindow { lo, hi, mode } => {
            let range = window_range(*lo, *hi, n)?;
            let mut order = truth.as_slice().to_vec();
            mode.scramble(&mut order[range], rng);
            Ok(NoisyDraw {
                ranking: Ranking::from_zero_based(order)?,
                concordant: None,
            })
        }
    }
}

/// Reorder the members of `S′` within the positions they occupy in `scrambled`
/// so that their relative order follows `truth`.
pub(crate) fn impose_concordance(truth: &Ranking, scrambled: &Ranking, members: &[bool]) -> Ranking {
    let truth_pos = truth.positions();
    let mut order = scrambled.as_slice().to_vec();
    let slots: Vec<usize> = (0..order.len()).filter(|&p| members[order[p]]).collect();
    let mut chosen: Vec<usize> = slots.iter().map(|&p| order[p]).collect();
    chosen.sort_by_key(|&item| truth_pos[item]);
    for (slot, item) in slots.into_iter().zip(chosen) {
        order[slot] = item;
    }
    Ranking::from_zero_based(order).expect("slot reassignment keeps a permutation")
}

pub(crate) fn shuffle_slice<T, R: Rng + ?Sized>(values: &mut [T], rng: &mut R) {
    for i in (1..values.len()).rev() {
        let j = rng.random_range(0..=i);
        values.swap(i, j);
    }
}

pub(crate) fn draw_subset<R: Rng + ?Sized>(subset: &SubsetSize, n: usize, rng: &mut R) -> Vec<bool> {
    match subset {
        SubsetSize::All => vec![true; n],
        SubsetSize::Uniform => loop {
            let members: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            if members.iter().any(|&b| b) {
                break members;
            }
        },
        SubsetSize::Fixed(k) => subset_of_size(*k, n, rng),
        SubsetSize::Weights(w) => {
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut size = w.len();
            for (i, weight) in w.iter().enumerate() {
                if u < *weight {
                    size = i + 1;
                    break;
                }
                u -= weight;
            }
            subset_of_size(size, n, rng)
        }
    }
}

fn subset_of_size<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<bool> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut members = vec![false; n];
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
        members[pool[i]] = true;
    }
    members
}

/// Whether every pair inside `items` is ordered identically by both rankings.
pub fn is_concordant_subset(a: &Ranking, b: &Ranking, items: &[usize]) -> bool {
    let (pa, pb) = (a.positions(), b.positions());
    items.iter().enumerate().all(|(k, &x)| {
        items[k + 1..]
            .iter()
            .all(|&y| (pa[x] < pa[y]) == (pb[x] < pb[y]))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m: usize,
    pub trials: usize,
    /// Fraction of trials whose aggregate equals the truth exactly.
    pub recovery_rate: f64,
    pub mean_tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub seed: u64,
    pub aggregator: String,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceReport {
    pub fn m_grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.m).collect()
    }

    pub fn recovery_rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.recovery_rate).collect()
    }

    /// Columns `m,trials,recovery_rate,mean_tau`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,trials,recovery_rate,mean_tau\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.m, p.trials, p.recovery_rate, p.mean_tau));
        }
        out
    }
}

pub fn validate_grid(m_grid: &[usize]) -> Result<(), NoiseError> {
    if m_grid.is_empty() {
        return Err(NoiseError::InvalidGrid("grid is empty".into()));
    }
    if m_grid[0] == 0 {
        return Err(NoiseError::InvalidGrid("sample counts must be >= 1".into()));
    }
    if m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NoiseError::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// For each `m`, run `trials` replicates of "draw `m` noisy rankings and
/// aggregate". Replicate `t` at grid point `m` draws from stream `t` of
/// `derive_seed(seed, m)`, so the report does not depend on scheduling.
pub fn convergence_experiment(
    truth: &Ranking,
    model: &NoiseModel,
    m_grid: &[usize],
    trials: usize,
    aggregator: &Aggregator,
    seed: u64,
) -> Result<ConvergenceReport, NoiseError> {
    validate_grid(m_grid)?;
    if trials == 0 {
        return Err(NoiseError::NoTrials);
    }
    model.validate(truth.len())?;
    let tau_defined = truth.len() >= 2;
    let mut points = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let point_seed = derive_seed(seed, m as u64);
        let outcomes: Vec<(bool, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<(bool, f64), NoiseError> {
                let mut rng = stream_rng(point_seed, t as u64);
                let samples = (0..m)
                    .map(|_| sample_noisy_ranking(truth, model, &mut rng).map(|d| d.ranking))
                    .collect::<Result<Vec<_>, _>>()?;
                let result = aggregator.aggregate(&samples)?;
                let tau = if tau_defined {
                    kendall_tau(&result.ranking, truth)?
                } else {
                    1.0
                };
                Ok((result.ranking == *truth, tau))
            })
            .collect::<Result<_, _>>()?;
        let recovered = outcomes.iter().filter(|(hit, _)| *hit).count();
        points.push(ConvergencePoint {
            m,
            trials,
            recovery_rate: recovered as f64 / trials as f64,
            mean_tau: outcomes.iter().map(|(_, t)| t).sum::<f64>() / trials as f64,
        });
    }
    Ok(ConvergenceReport {
        n: truth.len(),
        seed,
        aggregator: aggregator.name().to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn r(v: &[usize]) -> Ranking {
        Ranking::from_one_based(v).unwrap()
    }

    #[test]
    fn full_concordance_returns_truth() {
        let truth = r(&[4, 2, 5, 1, 3]);
        let mut rng = seeded_rng(3);
        for _ in 0..50 {
            let d = sample_noisy_ranking(&truth, &NoiseModel::noiseless(), &mut rng).unwrap();
            assert_eq!(d.ranking, truth);
        }
        let fixed = NoiseModel::ConcordantSubset {
            subset: SubsetSize::Fixed(5),
        };
        assert_eq!(sample_noisy_ranking(&truth, &fixed, &mut rng).unwrap().ranking, truth);
    }

    #[test]
    fn singleton_subset_leaves_pairs_uniform() {
        let truth = r(&[1, 2]);
        let model = NoiseModel::ConcordantSubset {
            subset: SubsetSize::Fixed(1),
        };
        let mut rng = seeded_rng(11);
        let draws = 10_000;
        let agree = (0..draws)
            .filter(|_| sample_noisy_ranking(&truth, &model, &mut rng).unwrap().ranking == truth)
            .count();
        let p = agree as f64 / draws as f64;
        // 5 standard errors of a fair coin over 10,000 draws
        assert!((p - 0.5).abs() < 5.0 * 0.005, "p = {p}");
    }

    #[test]
    fn full_window_is_uniform() {
        let truth = r(&[2, 3, 1]);
        let model = NoiseModel::window(1, 3);
        let mut rng = seeded_rng(12);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..60_000 {
            let d = sample_noisy_ranking(&truth, &model, &mut rng).unwrap();
            *counts.entry(d.ranking).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 6);
        let chi2: f64 = counts.values().map(|&c| (c as f64 - 10_000.0).powi(2) / 10_000.0).sum();
        assert!(chi2 < 20.52, "chi2 = {chi2}");
    }

    #[test]
    fn window_only_touches_its_positions() {
        let truth = r(&[1, 2, 3, 4, 5, 6]);
        let model = NoiseModel::window(3, 4);
        let mut rng = seeded_rng(1);
        for _ in 0..20 {
            let d = sample_noisy_ranking(&truth, &model, &mut rng).unwrap();
            let v = d.ranking.to_one_based();
            assert_eq!((v[0], v[1], v[4], v[5]), (1, 2, 5, 6));
        }
    }

    #[test]
    fn reverse_and_echo_windows_are_deterministic() {
        let truth = r(&[1, 2, 3, 4, 5]);
        let mut rng = seeded_rng(2);
        let reverse = NoiseModel::PositionalWindow {
            lo: 2,
            hi: 4,
            mode: WindowMode::Reverse,
        };
        let echo = NoiseModel::PositionalWindow {
            lo: 2,
            hi: 4,
            mode: WindowMode::Echo,
        };
        assert_eq!(sample_noisy_ranking(&truth, &reverse, &mut rng).unwrap().ranking, r(&[1, 4, 3, 2, 5]));
        assert_eq!(sample_noisy_ranking(&truth, &echo, &mut rng).unwrap().ranking, truth);
        let json = serde_json::to_string(&reverse).unwrap();
        assert_eq!(json, r#"{"kind":"positional-window","lo":2,"hi":4,"mode":"reverse"}"#);
        let parsed: NoiseModel = serde_json::from_str(r#"{"kind":"positional-window","lo":2,"hi":4}"#).unwrap();
        assert_eq!(parsed, NoiseModel::window(2, 4));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let truth = Ranking::identity(4);
        let mut rng = seeded_rng(0);
        for model in [
            NoiseModel::window(3, 2),
            NoiseModel::window(0, 2),
            NoiseModel::window(1, 5),
        ] {
            assert!(matches!(
                sample_noisy_ranking(&truth, &model, &mut rng),
                Err(NoiseError::EmptyWindow { .. })
            ));
        }
        for subset in [
            SubsetSize::Fixed(0),
            SubsetSize::Fixed(5),
            SubsetSize::Weights(vec![1.0; 3]),
            SubsetSize::Weights(vec![0.0; 4]),
            SubsetSize::Weights(vec![1.0, -1.0, 1.0, 1.0]),
        ] {
            let model = NoiseModel::ConcordantSubset { subset };
            assert!(matches!(
                sample_noisy_ranking(&truth, &model, &mut rng),
                Err(NoiseError::InvalidSubsetDistribution(_))
            ));
        }
    }

    #[test]
    fn recorded_subsets_are_concordant() {
        let truth = r(&[3, 7, 1, 8, 2, 6, 4, 5]);
        let mut rng = seeded_rng(8);
        let models = [
            NoiseModel::default(),
            NoiseModel::ConcordantSubset {
                subset: SubsetSize::Weights(vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]),
            },
        ];
        for model in &models {
            for _ in 0..2_000 {
                let d = sample_noisy_ranking(&truth, model, &mut rng).unwrap();
                let s = d.concordant.unwrap();
                assert!(!s.is_empty());
                assert!(is_concordant_subset(&d.ranking, &truth, &s));
            }
        }
    }

    #[test]
    fn default_model_correlates_positively_with_truth() {
        let truth = Ranking::identity(8);
        let mut rng = seeded_rng(77);
        let taus: Vec<f64> = (0..10_000)
            .map(|_| {
                let d = sample_noisy_ranking(&truth, &NoiseModel::default(), &mut rng).unwrap();
                kendall_tau(&d.ranking, &truth).unwrap()
            })
            .collect();
        let mean = taus.iter().sum::<f64>() / taus.len() as f64;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (taus.len() - 1) as f64;
        let se = (var / taus.len() as f64).sqrt();
        assert!(mean > 5.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn noiseless_experiment_always_recovers() {
        let truth = r(&[2, 4, 1, 3]);
        let report = convergence_experiment(
            &truth,
            &NoiseModel::noiseless(),
            &[1, 2, 5],
            20,
            &Aggregator::kemeny(),
            1,
        )
        .unwrap();
        assert!(report.points.iter().all(|p| p.recovery_rate == 1.0 && p.mean_tau == 1.0));
        assert!(report.to_csv().starts_with("m,trials,recovery_rate,mean_tau\n1,20,1,1\n"));
    }

    #[test]
    fn experiment_is_deterministic_and_validates_grid() {
        let truth = Ranking::identity(5);
        let run = || {
            convergence_experiment(&truth, &NoiseModel::default(), &[1, 3, 7], 30, &Aggregator::kemeny(), 42)
                .unwrap()
        };
        assert_eq!(run(), run());
        let agg = Aggregator::kemeny();
        let model = NoiseModel::default();
        assert!(matches!(
            convergence_experiment(&truth, &model, &[], 5, &agg, 0),
            Err(NoiseError::InvalidGrid(_))
        ));
        assert!(matches!(
            convergence_experiment(&truth, &model, &[3, 3], 5, &agg, 0),
            Err(NoiseError::InvalidGrid(_))
        ));
        assert!(matches!(
            convergence_experiment(&truth, &model, &[0, 3], 5, &agg, 0),
            Err(NoiseError::InvalidGrid(_))
        ));
        assert_eq!(
            convergence_experiment(&truth, &model, &[1], 0, &agg, 0),
            Err(NoiseError::NoTrials)
        );
    }

    #[test]
    fn balanced_two_voter_conflict_is_deterministic() {
        let a = r(&[1, 2, 3]);
        let b = r(&[3, 2, 1]);
        let first = Aggregator::kemeny().aggregate(&[a.clone(), b.clone()]).unwrap();
        let second = Aggregator::kemeny().aggregate(&[b, a]).unwrap();
        assert_eq!(first.ranking, second.ranking);
        assert_eq!(first.ranking, r(&[1, 2, 3]));
    }
}
