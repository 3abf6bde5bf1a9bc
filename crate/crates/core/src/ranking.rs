//! Permutations, item lists and Kendall tau machinery.
//!
//! A [`Ranking`] of size `n` is a bijection on `{0, …, n-1}` stored as the
//! sequence `σ(0), σ(1), …`: position `i` holds item `σ(i)`. The public JSON
//! form is 1-based (`[3,1,2]`), the Rust API is 0-based.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankingError {
    #[error("ranking must contain at least one element")]
    Empty,
    #[error("not a permutation of 1..={n}: {values:?}")]
    NotAPermutation { n: usize, values: Vec<usize> },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("kendall tau needs at least two elements, got {0}")]
    TooShort(usize),
    #[error("duplicate item id {0:?}")]
    DuplicateItemId(String),
}

/// A total order over `n` items, `σ(i)` = item at position `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    /// Build from 0-based values, rejecting anything that is not a bijection.
    pub fn from_zero_based(values: Vec<usize>) -> Result<Self, RankingError> {
        let n = values.len();
        if n == 0 {
            return Err(RankingError::Empty);
        }
        let mut seen = vec![false; n];
        for &v in &values {
            if v >= n || seen[v] {
                return Err(RankingError::NotAPermutation {
                    n,
                    values: values.iter().map(|v| v + 1).collect(),
                });
            }
            seen[v] = true;
        }
        Ok(Ranking(values))
    }

    /// Build from the 1-based values used in documentation and JSON.
    pub fn from_one_based(values: &[usize]) -> Result<Self, RankingError> {
        if values.contains(&0) {
            return Err(RankingError::NotAPermutation {
                n: values.len(),
                values: values.to_vec(),
            });
        }
        Self::from_zero_based(values.iter().map(|v| v - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity ranking needs n >= 1");
        Ranking((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Item at position `i` (0-based).
    pub fn at(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `positions()[item]` is the 0-based position of `item`; same data as [`Ranking::invert`].
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    pub fn invert(&self) -> Ranking {
        Ranking(self.positions())
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Ranking) -> Result<Ranking, RankingError> {
        check_dims(self.len(), other.len())?;
        Ok(Ranking(other.0.iter().map(|&j| self.0[j]).collect()))
    }

    pub fn reversed(&self) -> Ranking {
        Ranking(self.0.iter().rev().copied().collect())
    }

    /// `inv(σ)_i = #{j < i : σ(j) > σ(i)}`.
    pub fn inversion_vector(&self) -> Vec<usize> {
        (0..self.0.len())
            .map(|i| self.0[..i].iter().filter(|&&v| v > self.0[i]).count())
            .collect()
    }

    /// `X[σ]_i = X_{σ(i)}`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>, RankingError> {
        check_dims(self.len(), items.len())?;
        Ok(self.0.iter().map(|&j| items[j].clone()).collect())
    }
}

impl fmt::Debug for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ranking{:?}", self.to_one_based())
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_one_based().iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Ranking {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ranking {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<usize>::deserialize(deserializer)?;
        Ranking::from_one_based(&values).map_err(serde::de::Error::custom)
    }
}

fn check_dims(left: usize, right: usize) -> Result<(), RankingError> {
    if left == right {
        Ok(())
    } else {
        Err(RankingError::DimensionMismatch { left, right })
    }
}

/// Number of discordant pairs, `Σ_i inv(σ1⁻¹ ∘ σ2)_i`.
pub fn kendall_distance(a: &Ranking, b: &Ranking) -> Result<u64, RankingError> {
    let relative = a.invert().compose(b)?;
    Ok(count_inversions(relative.as_slice()))
}

/// Inversion count by merge sort, equal to the sum of the inversion vector.
fn count_inversions(values: &[usize]) -> u64 {
    if values.len() < 2 {
        return 0;
    }
    let mut buf = values.to_vec();
    let mut scratch = vec![0; values.len()];
    merge_count(&mut buf, &mut scratch)
}

fn merge_count(values: &mut [usize], scratch: &mut [usize]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = values.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        merge_count(left, sl) + merge_count(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if values[i] <= values[j] {
            scratch[k] = values[i];
            i += 1;
        } else {
            scratch[k] = values[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&values[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&values[j..n]);
    values.copy_from_slice(&scratch[..n]);
    count
}

/// `C(n, 2)`.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// `τ = 1 − 2d / C(n,2)` in any [`Scalar`].
pub fn kendall_tau_as<T: Scalar>(a: &Ranking, b: &Ranking) -> Result<T, RankingError> {
    let d = kendall_distance(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(RankingError::TooShort(n));
    }
    let two = T::from_count(2);
    Ok(T::one() - two * T::from_count(d) / T::from_count(pair_count(n)))
}

pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64, RankingError> {
    kendall_tau_as::<f64>(a, b)
}

/// Uniform random permutation by Fisher–Yates: for `i` from `n-1` down to 1,
/// swap position `i` with a uniform position in `0..=i`.
pub fn random_ranking<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Ranking, RankingError> {
    if n == 0 {
        return Err(RankingError::Empty);
    }
    let mut values: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        values.swap(i, j);
    }
    Ok(Ranking(values))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
}

impl Item {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Item {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// The ordered payload being ranked; ids are unique.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ItemList(Vec<Item>);

impl ItemList {
    pub fn new(items: Vec<Item>) -> Result<Self, RankingError> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(RankingError::DuplicateItemId(item.id.clone()));
            }
        }
        Ok(ItemList(items))
    }

    /// Items whose ids are their 1-based positions.
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        ItemList(
            texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| Item::new((i + 1).to_string(), t))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    pub fn get(&self, i: usize) -> &Item {
        &self.0[i]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|i| i.id.as_str())
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|i| i.text.as_str())
    }

    pub fn apply(&self, sigma: &Ranking) -> Result<ItemList, RankingError> {
        Ok(ItemList(sigma.apply(&self.0)?))
    }

    pub fn into_items(self) -> Vec<Item> {
        self.0
    }
}

impl<'de> Deserialize<'de> for ItemList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let items = Vec::<Item>::deserialize(deserializer)?;
        ItemList::new(items).map_err(serde::de::Error::custom)
    }
}
