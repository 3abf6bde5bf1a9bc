//! Positional-bias diagnostics over sample traces.
//!
//! A pair of presented positions `(i, j)`, `i < j`, is *reversed* in a sample
//! when the ranker's output places the item shown at `j` above the item shown
//! at `i`. Cells are stored 0-based and emitted 1-based.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::RankingSample;
use crate::ranking::{pair_count, Ranking};
use crate::scalar::Scalar;
use crate::stats::chi_square_sf;

/// Cells at least this far above zero variance count as random.
const VARIANCE_EPS: f64 = 1e-12;
/// Largest list size for which per-sample cell covariances are tracked.
pub const MAX_COVARIANCE_N: usize = 40;
/// Minimum expected count per cell before pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BiasError {
    #[error("no samples to analyse")]
    Empty,
    #[error("samples mix list sizes {expected} and {found}")]
    MixedSizes { expected: usize, found: usize },
    #[error("crop {crop} exceeds list size {n}")]
    CropTooLarge { crop: usize, n: usize },
    #[error("every cell is missing")]
    AllCellsMissing,
    #[error("too few observations: {groups} cell group(s) after pooling")]
    TooFewObservations { groups: usize },
    #[error("matrices have sizes {0} and {1}")]
    SizeMismatch(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversionMatrix {
    pub n: usize,
    pub samples: u64,
    /// Upper triangle only; `counts[i][j]` for `i < j`.
    pub counts: Vec<Vec<u64>>,
    pub opportunities: Vec<Vec<u64>>,
    /// Rate minus the mean rate of used cells; `None` marks a missing cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Vec<Vec<Option<f64>>>>,
    /// Sums of `x_g x_h` over samples, by cell index, when tracked.
    #[serde(skip)]
    co: Option<Vec<u64>>,
}

fn cell_index(n: usize, i: usize, j: usize) -> usize {
    // row-major index into the strict upper triangle
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl ReversionMatrix {
    pub fn new(n: usize) -> Self {
        let cells = pair_count(n) as usize;
        ReversionMatrix {
            n,
            samples: 0,
            counts: vec![vec![0; n]; n],
            opportunities: vec![vec![0; n]; n],
            normalized: None,
            co: (n <= MAX_COVARIANCE_N).then(|| vec![0; cells * cells]),
        }
    }

    pub fn cells(&self) -> usize {
        pair_count(self.n) as usize
    }

    /// Record the first `self.n` presented positions of one output.
    pub fn add_output(&mut self, raw_output: &Ranking) -> Result<(), BiasError> {
        if raw_output.len() < self.n {
            return Err(BiasError::CropTooLarge {
                crop: self.n,
                n: raw_output.len(),
            });
        }
        let pos = raw_output.positions();
        let n = self.n;
        let mut reversed = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                self.opportunities[i][j] += 1;
                if pos[i] > pos[j] {
                    self.counts[i][j] += 1;
                    reversed.push(cell_index(n, i, j));
                }
            }
        }
        if let Some(co) = &mut self.co {
            let cells = pair_count(n) as usize;
            for &g in &reversed {
                for &h in &reversed {
                    co[g * cells + h] += 1;
                }
            }
        }
        self.samples += 1;
        self.normalized = None;
        Ok(())
    }

    /// Elementwise sum of two matrices over the same positions.
    pub fn merge(&mut self, other: &ReversionMatrix) -> Result<(), BiasError> {
        if self.n != other.n {
            return Err(BiasError::SizeMismatch(self.n, other.n));
        }
        for i in 0..self.n {
            for j in 0..self.n {
                self.counts[i][j] += other.counts[i][j];
                self.opportunities[i][j] += other.opportunities[i][j];
            }
        }
        self.co = match (self.co.take(), &other.co) {
            (Some(mut a), Some(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Some(a)
            }
            _ => None,
        };
        self.samples += other.samples;
        self.normalized = None;
        Ok(())
    }

    pub fn total_reversions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Used cells `(i, j, count, opportunities)` in row-major order.
    pub fn used_cells(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n).filter_map(move |j| {
                let o = self.opportunities[i][j];
                (o > 0).then_some((i, j, self.counts[i][j], o))
            })
        })
    }

    pub fn rate(&self, i: usize, j: usize) -> Option<f64> {
        let o = self.opportunities[i][j];
        (i < j && o > 0).then(|| self.counts[i][j] as f64 / o as f64)
    }

    /// Mean-centred rates in any scalar type.
    pub fn normalized_rates_as<T: Scalar>(&self) -> Result<Vec<Vec<Option<T>>>, BiasError> {
        let rates: Vec<(usize, usize, T)> = self
            .used_cells()
            .map(|(i, j, c, o)| (i, j, T::from_count(c) / T::from_count(o)))
            .collect();
        if rates.is_empty() {
            return Err(BiasError::AllCellsMissing);
        }
        let total = rates.iter().fold(T::zero(), |acc, (_, _, r)| acc + *r);
        let mean = total / T::from_count(rates.len() as u64);
        let mut out = vec![vec![None; self.n]; self.n];
        for (i, j, r) in rates {
            out[i][j] = Some(r - mean);
        }
        Ok(out)
    }

    /// Long-form CSV: `i,j,count,opportunities,rate,normalized`, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,count,opportunities,rate,normalized\n");
        for i in 0..self.n {
            for j in i + 1..self.n {
                let o = self.opportunities[i][j];
                let rate = self.rate(i, j).map(|r| r.to_string()).unwrap_or_default();
                let norm = self
                    .normalized
                    .as_ref()
                    .and_then(|m| m[i][j])
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                out.push_str(&format!("{},{},{},{o},{rate},{norm}\n", i + 1, j + 1, self.counts[i][j]));
            }
        }
        out
    }
}

/// Fold raw outputs of equal length into a reversion matrix, optionally
/// restricted to the first `crop` presented positions.
pub fn count_output_reversions<'a>(
    outputs: impl IntoIterator<Item = &'a Ranking>,
    crop: Option<usize>,
) -> Result<ReversionMatrix, BiasError> {
    let mut outputs = outputs.into_iter().peekable();
    let n = outputs.peek().ok_or(BiasError::Empty)?.len();
    let size = match crop {
        Some(c) if c > n => return Err(BiasError::CropTooLarge { crop: c, n }),
        Some(c) => c,
        None => n,
    };
    let mut matrix = ReversionMatrix::new(size);
    for out in outputs {
        if out.len() != n {
            return Err(BiasError::MixedSizes {
                expected: n,
                found: out.len(),
            });
        }
        matrix.add_output(out)?;
    }
    Ok(matrix)
}

pub fn count_reversions(samples: &[RankingSample], crop: Option<usize>) -> Result<ReversionMatrix, BiasError> {
    count_output_reversions(samples.iter().map(|s| &s.raw_output), crop)
}

/// Fill `normalized` with mean-centred rates.
pub fn normalize_matrix(mut matrix: ReversionMatrix) -> Result<ReversionMatrix, BiasError> {
    matrix.normalized = Some(matrix.normalized_rates_as::<f64>()?);
    Ok(matrix)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityTest {
    /// Pearson statistic of pooled cell counts against the pooled mean rate.
    pub statistic: f64,
    pub groups: usize,
    pub mean_rate: f64,
    /// p-value treating cells as independent binomials, `groups - 1` dof.
    pub p_independent: f64,
    /// Scale and degrees of freedom of the moment-matched reference
    /// `scale · χ²(dof)` under the sample covariance of cells.
    pub scale: f64,
    pub effective_dof: f64,
    /// p-value against the moment-matched reference; equals `p_independent`
    /// when covariances are not tracked.
    pub p_value: f64,
}

/// Pool consecutive used cells until each pool expects at least
/// [`MIN_EXPECTED`] reversions and non-reversions.
fn pool_cells(cells: &[(usize, u64, u64)], mean: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut opp = 0u64;
    for (k, &(_, _, o)) in cells.iter().enumerate() {
        current.push(k);
        opp += o;
        let expected = opp as f64 * mean.min(1.0 - mean);
        if expected >= MIN_EXPECTED {
            groups.push(std::mem::take(&mut current));
            opp = 0;
        }
    }
    if !current.is_empty() {
        match groups.last_mut() {
            Some(last) => last.extend(current),
            None => groups.push(current),
        }
    }
    groups
}

/// Test whether reversion rates are equal across cells.
///
/// Pairs of cells sharing a position are correlated within a sample, which
/// inflates the Pearson statistic's variance well beyond the binomial case.
/// When per-sample covariances are tracked, the p-value comes from a
/// chi-square scaled to match the statistic's mean and variance under that
/// covariance; with independent cells this reduces to `χ²(groups - 1)`.
pub fn uniformity_test(matrix: &ReversionMatrix) -> Result<UniformityTest, BiasError> {
    let cells: Vec<(usize, u64, u64)> = matrix
        .used_cells()
        .map(|(i, j, c, o)| (cell_index(matrix.n, i, j), c, o))
        .collect();
    if cells.is_empty() {
        return Err(BiasError::AllCellsMissing);
    }
    let (c_tot, o_tot) = cells.iter().fold((0, 0), |(c, o), x| (c + x.1, o + x.2));
    let mean = c_tot as f64 / o_tot as f64;
    if mean <= 0.0 || mean >= 1.0 {
        let groups = cells.len();
        return Ok(UniformityTest {
            statistic: 0.0,
            groups,
            mean_rate: mean,
            p_independent: 1.0,
            scale: 1.0,
            effective_dof: groups.saturating_sub(1) as f64,
            p_value: 1.0,
        });
    }
    let groups = pool_cells(&cells, mean);
    if groups.len() < 2 {
        return Err(BiasError::TooFewObservations { groups: groups.len() });
    }
    let var = mean * (1.0 - mean);
    let sums: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            g.iter()
                .fold((0.0, 0.0), |(c, o), &k| (c + cells[k].1 as f64, o + cells[k].2 as f64))
        })
        .collect();
    let statistic: f64 = sums.iter().map(|(c, o)| (c - o * mean).powi(2) / (o * var)).sum();
    let dof = groups.len() - 1;
    let p_independent = chi_square_sf(statistic, dof);

    let (scale, effective_dof, p_value) = match &matrix.co {
        Some(co) if matrix.samples > 1 => {
            let k = moment_matrix(matrix, co, &cells, &groups, mean);
            let t1: f64 = (0..k.len()).map(|a| k[a][a]).sum();
            let t2: f64 = k.iter().flatten().map(|v| v * v).sum();
            if t1 <= VARIANCE_EPS {
                let p = if statistic > VARIANCE_EPS { 0.0 } else { 1.0 };
                (0.0, 0.0, p)
            } else {
                let scale = t2 / t1;
                let edof = t1 * t1 / t2;
                (scale, edof, chi_square_sf_real(statistic / scale, edof))
            }
        }
        _ => (1.0, dof as f64, p_independent),
    };
    Ok(UniformityTest {
        statistic,
        groups: groups.len(),
        mean_rate: mean,
        p_independent,
        scale,
        effective_dof,
        p_value,
    })
}

/// `W^{1/2} L Σ Lᵀ W^{1/2}` for pooled groups, where `Σ` is the per-sample
/// covariance of group counts scaled to the statistic, `L` removes the pooled
/// mean and `W` holds the binomial weights.
fn moment_matrix(
    matrix: &ReversionMatrix,
    co: &[u64],
    cells: &[(usize, u64, u64)],
    groups: &[Vec<usize>],
    mean: f64,
) -> Vec<Vec<f64>> {
    let s = matrix.samples as f64;
    let total_cells = matrix.cells();
    let gn = groups.len();
    // per-sample covariance of group sums
    let mut sigma = vec![vec![0.0; gn]; gn];
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&k| cells[k].1 as f64).sum::<f64>() / s)
        .collect();
    for a in 0..gn {
        for b in a..gn {
            let mut cross = 0u64;
            for &ka in &groups[a] {
                let row = cells[ka].0 * total_cells;
                for &kb in &groups[b] {
                    cross += co[row + cells[kb].0];
                }
            }
            let v = cross as f64 / s - means[a] * means[b];
            sigma[a][b] = v;
            sigma[b][a] = v;
        }
    }
    // group sizes in cells, each observed once per sample
    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let size_total: f64 = sizes.iter().sum();
    // L = I - sizes · 1ᵀ / size_total
    let col_sums: Vec<f64> = (0..gn).map(|b| (0..gn).map(|a| sigma[a][b]).sum()).collect();
    let grand: f64 = col_sums.iter().sum();
    let mut k = vec![vec![0.0; gn]; gn];
    for a in 0..gn {
        let row_sum: f64 = sigma[a].iter().sum();
        for b in 0..gn {
            let lsl = sigma[a][b] - sizes[a] / size_total * col_sums[b] - sizes[b] / size_total * row_sum
                + sizes[a] * sizes[b] / (size_total * size_total) * grand;
            k[a][b] = lsl / ((sizes[a] * sizes[b]).sqrt() * mean * (1.0 - mean));
        }
    }
    k
}

fn chi_square_sf_real(x: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    match ChiSquared::new(dof) {
        Ok(d) => d.sf(x),
        Err(_) => f64::NAN,
    }
}
