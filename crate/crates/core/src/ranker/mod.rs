//! The listwise-ranker boundary.
//!
//! A [`Ranker`] receives a presented item list and returns either a ranking of
//! presented positions or raw text to be parsed with [`parse_ranking_output`].

pub mod parse;
pub mod prompt;
pub mod remote;
pub mod simulated;

use thiserror::Error;

use crate::noise::NoiseError;
use crate::ranking::{ItemList, Ranking};

pub use parse::{parse_identifier_chain, parse_ranking_output, repair, ParseError};
pub use prompt::{render, render_identifier_chain, rendered_chars, ChatMessage, PromptStyle};
pub use remote::{ChatClient, ChatReply, EndpointConfig, HttpReply, HttpTransport, RemoteError, RemoteRanker, Transport};
pub use simulated::{simulated_rank, SimulatedRanker, TruthOracle};

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("item {0:?} is unknown to the truth oracle")]
    UnknownItem(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// One call to a ranker.
#[derive(Clone, Copy, Debug)]
pub struct RankRequest<'a> {
    pub items: &'a ItemList,
    pub query: Option<&'a str>,
    /// Per-call seed; deterministic rankers derive all randomness from it.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RankerOutput {
    /// Unparsed model output.
    Text(String),
    /// A ranking of presented positions.
    Ranking(Ranking),
}

pub trait Ranker: Send + Sync {
    fn name(&self) -> String;

    /// Sampling temperature forwarded to the model, if the ranker has one.
    fn temperature(&self) -> Option<f64>;

    /// Style used to parse text outputs.
    fn style(&self) -> PromptStyle;

    /// Cap on concurrent calls.
    fn max_in_flight(&self) -> usize {
        usize::MAX
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankerOutput, RankerError>;
}

impl<R: Ranker + ?Sized> Ranker for &R {
    fn name(&self) -> String {
        (**self).name()
    }

    fn temperature(&self) -> Option<f64> {
        (**self).temperature()
    }

    fn style(&self) -> PromptStyle {
        (**self).style()
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankerOutput, RankerError> {
        (**self).rank(request)
    }
}
