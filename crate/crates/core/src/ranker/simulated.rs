//! A noisy listwise ranker driven by a truth oracle.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{render_identifier_chain, PromptStyle};
use super::{RankRequest, Ranker, RankerError, RankerOutput};
use crate::noise::{sample_noisy_ranking, NoiseModel};
use crate::ranking::{ItemList, Ranking};
use crate::rng::seeded_rng;

/// True rank of every known item id; lower ranks come first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthOracle {
    ranks: HashMap<String, usize>,
}

impl TruthOracle {
    /// Oracle whose true order is `ids` as given.
    pub fn from_order<S: AsRef<str>>(ids: impl IntoIterator<Item = S>) -> Self {
        TruthOracle {
            ranks: ids
                .into_iter()
                .enumerate()
                .map(|(rank, id)| (id.as_ref().to_string(), rank))
                .collect(),
        }
    }

    /// Oracle for a list whose true order is `gold` (positions into `items`).
    pub fn from_gold(items: &ItemList, gold: &Ranking) -> Self {
        TruthOracle::from_order(gold.as_slice().iter().map(|&i| items.get(i).id.as_str()))
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.ranks.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// The true ordering of `presented` as a ranking of presented positions.
    pub fn truth_of(&self, presented: &ItemList) -> Result<Ranking, RankerError> {
        let ranks = presented
            .ids()
            .map(|id| self.rank_of(id).ok_or_else(|| RankerError::UnknownItem(id.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut order: Vec<usize> = (0..presented.len()).collect();
        order.sort_by_key(|&p| (ranks[p], p));
        Ok(Ranking::from_zero_based(order).expect("sorted positions form a permutation"))
    }
}

/// Rank `presented` under `model`.
///
/// Concordant-subset noise is drawn around the truth of the presented list.
/// Positional-window noise acts on input positions: the items presented at
/// `lo..=hi` keep the output slots the truth gives them, but are reassigned
/// among those slots in shuffled, reversed or arrival order. The window is
/// cropped to the presented length.
pub fn simulated_rank<R: Rng + ?Sized>(
    presented: &ItemList,
    oracle: &TruthOracle,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<Ranking, RankerError> {
    let truth = oracle.truth_of(presented)?;
    match model {
        NoiseModel::ConcordantSubset { .. } => Ok(sample_noisy_ranking(&truth, model, rng)?.ranking),
        NoiseModel::PositionalWindow { lo, hi, mode } => {
            let n = presented.len();
            model.validate(n.max(*hi))?;
            let hi = (*hi).min(n);
            if *lo > hi {
                return Ok(truth);
            }
            let mut order = truth.into_vec();
            let slots: Vec<usize> = (0..n).filter(|&s| (lo - 1..hi).contains(&order[s])).collect();
            let mut window: Vec<usize> = (lo - 1..hi).collect();
            mode.scramble(&mut window, rng);
            for (slot, item) in slots.into_iter().zip(window) {
                order[slot] = item;
            }
            Ok(Ranking::from_zero_based(order).expect("slot reassignment keeps a permutation"))
        }
    }
}

/// Deterministic given the per-call seed; ignores temperature.
#[derive(Clone, Debug)]
pub struct SimulatedRanker {
    pub oracle: TruthOracle,
    pub model: NoiseModel,
    pub style: PromptStyle,
    /// Emit text in the style's output format instead of a ranking.
    pub as_text: bool,
}

impl SimulatedRanker {
    pub fn new(oracle: TruthOracle, model: NoiseModel) -> Self {
        SimulatedRanker {
            oracle,
            model,
            style: PromptStyle::RankGpt,
            as_text: false,
        }
    }

    pub fn perfect(oracle: TruthOracle) -> Self {
        SimulatedRanker::new(oracle, NoiseModel::noiseless())
    }

    pub fn with_text(mut self, style: PromptStyle) -> Self {
        self.style = style;
        self.as_text = true;
        self
    }
}

/// What a well-behaved model prompted with `style` would print for `order`.
pub fn format_output(style: PromptStyle, presented: &ItemList, order: &Ranking) -> String {
    let texts = || order.as_slice().iter().map(|&p| presented.get(p).text.as_str());
    match style {
        PromptStyle::RankGpt | PromptStyle::RankVicuna => render_identifier_chain(order.as_slice()),
        PromptStyle::MathSort | PromptStyle::WordSort => texts().collect::<Vec<_>>().join(", "),
        PromptStyle::SentenceSort => texts().collect::<Vec<_>>().join("\n"),
    }
}

impl Ranker for SimulatedRanker {
    fn name(&self) -> String {
        "simulated".into()
    }

    fn temperature(&self) -> Option<f64> {
        None
    }

    fn style(&self) -> PromptStyle {
        self.style
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankerOutput, RankerError> {
        let mut rng = seeded_rng(request.seed);
        let order = simulated_rank(request.items, &self.oracle, &self.model, &mut rng)?;
        Ok(if self.as_text {
            RankerOutput::Text(format_output(self.style, request.items, &order))
        } else {
            RankerOutput::Ranking(order)
        })
    }
}
