//! Flags, the TOML config file and their resolution.
//!
//! Every setting resolves as flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use permsc::aggregation::{Aggregator, Budget, DEFAULT_EXACT_LIMIT, DEFAULT_RRF_K};
use permsc::noise::{NoiseModel, SubsetSize, WindowMode};
use permsc::pipeline::{OnUnparseable, PscConfig, ShuffleSpace, DEFAULT_M, DEFAULT_STRIDE, DEFAULT_WINDOW};
use permsc::ranker::{EndpointConfig, PromptStyle};

use crate::error::{config_error, CliResult};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "runs";

/// Parse a kebab-case enum through its serde representation.
pub fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Comma-separated list, e.g. `1,5,25`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

/// Noise specs: `none`, `concordant`, `concordant:size=K`,
/// `window:LO-HI` or `window:LO-HI:MODE` with MODE one of shuffle, reverse, echo.
pub fn parse_noise(spec: &str) -> Result<NoiseModel, String> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    match (kind, rest.as_slice()) {
        ("none", []) => Ok(NoiseModel::noiseless()),
        ("concordant", []) => Ok(NoiseModel::default()),
        ("concordant", [size]) => {
            let k = size
                .strip_prefix("size=")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| format!("expected size=K, got {size:?}"))?;
            Ok(NoiseModel::ConcordantSubset {
                subset: SubsetSize::Fixed(k),
            })
        }
        ("window", [range, mode @ ..]) if mode.len() <= 1 => {
            let (lo, hi) = range
                .split_once('-')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| format!("expected LO-HI, got {range:?}"))?;
            let mode: WindowMode = match mode.first() {
                Some(m) => kebab(m)?,
                None => WindowMode::default(),
            };
            Ok(NoiseModel::PositionalWindow { lo, hi, mode })
        }
        _ => Err(format!("unrecognised noise spec {spec:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorKind {
    Kemeny,
    Rrf,
    Borda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankerKind {
    Simulated,
    Remote,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parent directory of timestamped run directories.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write into exactly this directory instead.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct PscArgs {
    /// Shuffled samples per list.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_parser = kebab::<AggregatorKind>)]
    pub aggregator: Option<AggregatorKind>,
    #[arg(long)]
    pub rrf_k: Option<f64>,
    /// Largest list solved by the exact subset solver.
    #[arg(long)]
    pub exact_limit: Option<usize>,
    /// Node budget of the branch-and-bound solver; 0 means unbounded.
    #[arg(long)]
    pub max_nodes: Option<u64>,
    #[arg(long, value_parser = kebab::<OnUnparseable>)]
    pub on_unparseable: Option<OnUnparseable>,
    #[arg(long, value_parser = kebab::<ShuffleSpace>)]
    pub shuffle_space: Option<ShuffleSpace>,
    /// Cap on concurrent ranker calls.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Sliding window size for TREC reranking.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct RankerArgs {
    #[arg(long, value_parser = kebab::<RankerKind>)]
    pub ranker: Option<RankerKind>,
    /// Simulated noise, e.g. `concordant`, `window:3-8`, `window:4-7:reverse`.
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseModel>,
    /// Make the simulated ranker answer in text, exercising the parser.
    #[arg(long)]
    pub text: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Prompt style for TREC reranking (rankgpt or rankvicuna).
    #[arg(long)]
    pub style: Option<PromptStyle>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// Name of the environment variable holding the API key.
    #[arg(long)]
    pub credential_env: Option<String>,
    #[arg(long)]
    pub char_budget: Option<usize>,
    #[arg(long)]
    pub audit_log: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub psc: PscSection,
    pub ranker: RankerSection,
    pub remote: RemoteSection,
    pub simulate: SimulateSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PscSection {
    pub m: Option<usize>,
    pub aggregator: Option<AggregatorKind>,
    pub rrf_k: Option<f64>,
    pub exact_limit: Option<usize>,
    pub max_nodes: Option<u64>,
    pub on_unparseable: Option<OnUnparseable>,
    pub shuffle_space: Option<ShuffleSpace>,
    pub workers: Option<usize>,
    pub window: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerSection {
    pub kind: Option<RankerKind>,
    pub noise: Option<String>,
    pub text: Option<bool>,
    pub temperature: Option<f64>,
    pub style: Option<PromptStyle>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub max_attempts: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub credential_env: Option<String>,
    pub char_budget: Option<usize>,
    pub audit_log: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub m_grid: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub m_grid: Option<Vec<usize>>,
    pub temperature_grid: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }
}

/// Settings shared by every command.
#[derive(Clone, Debug, Serialize)]
pub struct Common {
    pub seed: u64,
    pub out: PathBuf,
    pub run_dir: Option<PathBuf>,
}

pub fn resolve_common(args: &CommonArgs, file: &FileConfig) -> Common {
    Common {
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        out: args
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        run_dir: args.run_dir.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedPsc {
    pub m: usize,
    pub aggregator: Aggregator,
    pub on_unparseable: OnUnparseable,
    pub shuffle_space: ShuffleSpace,
    pub workers: Option<usize>,
    pub window: usize,
    pub stride: usize,
}

impl ResolvedPsc {
    /// Pipeline config for one list with its own seed.
    pub fn config(&self, seed: u64) -> PscConfig {
        PscConfig {
            m: self.m,
            aggregator: self.aggregator,
            seed,
            on_unparseable: self.on_unparseable,
            shuffle_space: self.shuffle_space,
            workers: self.workers,
        }
    }
}

pub fn build_aggregator(kind: AggregatorKind, rrf_k: f64, exact_limit: usize, max_nodes: u64) -> CliResult<Aggregator> {
    Ok(match kind {
        AggregatorKind::Kemeny => Aggregator::Kemeny {
            exact_limit,
            budget: if max_nodes == 0 { Budget::unlimited() } else { Budget::nodes(max_nodes) },
        },
        AggregatorKind::Borda => Aggregator::Borda,
        AggregatorKind::Rrf => {
            if !(rrf_k.is_finite() && rrf_k >= 0.0) {
                return Err(config_error(format!("rrf k must be finite and non-negative, got {rrf_k}")));
            }
            Aggregator::Rrf { k: rrf_k }
        }
    })
}

pub fn resolve_psc(args: &PscArgs, file: &FileConfig) -> CliResult<ResolvedPsc> {
    let f = &file.psc;
    let m = args.m.or(f.m).unwrap_or(DEFAULT_M);
    if m == 0 {
        return Err(config_error("m must be at least 1"));
    }
    let default_nodes = Budget::default().max_nodes.unwrap_or(0);
    let aggregator = build_aggregator(
        args.aggregator.or(f.aggregator).unwrap_or(AggregatorKind::Kemeny),
        args.rrf_k.or(f.rrf_k).unwrap_or(DEFAULT_RRF_K),
        args.exact_limit.or(f.exact_limit).unwrap_or(DEFAULT_EXACT_LIMIT),
        args.max_nodes.or(f.max_nodes).unwrap_or(default_nodes),
    )?;
    let window = args.window.or(f.window).unwrap_or(DEFAULT_WINDOW);
    let stride = args.stride.or(f.stride).unwrap_or(DEFAULT_STRIDE);
    if window == 0 || stride == 0 || stride > window {
        return Err(config_error(format!(
            "need 1 <= stride <= window, got window {window}, stride {stride}"
        )));
    }
    let workers = args.workers.or(f.workers);
    if workers == Some(0) {
        return Err(config_error("workers must be at least 1"));
    }
    Ok(ResolvedPsc {
        m,
        aggregator,
        on_unparseable: args.on_unparseable.or(f.on_unparseable).unwrap_or_default(),
        shuffle_space: args.shuffle_space.or(f.shuffle_space).unwrap_or_default(),
        workers,
        window,
        stride,
    })
}

/// Ranker settings; the credential itself is never stored here.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RankerSpec {
    Simulated {
        noise: NoiseModel,
        text: bool,
        style: Option<PromptStyle>,
    },
    Remote {
        endpoint: EndpointConfig,
        style: Option<PromptStyle>,
    },
}

impl RankerSpec {
    pub fn style(&self) -> Option<PromptStyle> {
        match self {
            RankerSpec::Simulated { style, .. } | RankerSpec::Remote { style, .. } => *style,
        }
    }

    pub fn is_simulated(&self) -> bool {
        matches!(self, RankerSpec::Simulated { .. })
    }
}

pub fn resolve_ranker(args: &RankerArgs, file: &FileConfig) -> CliResult<RankerSpec> {
    let f = &file.ranker;
    let style = args.style.or(f.style);
    let temperature = args.temperature.or(f.temperature);
    if let Some(t) = temperature {
        if !(t.is_finite() && t >= 0.0) {
            return Err(config_error(format!("temperature must be non-negative, got {t}")));
        }
    }
    match args.ranker.or(f.kind).unwrap_or(RankerKind::Simulated) {
        RankerKind::Simulated => {
            let noise = match (&args.noise, &f.noise) {
                (Some(n), _) => n.clone(),
                (None, Some(spec)) => parse_noise(spec).map_err(config_error)?,
                (None, None) => NoiseModel::default(),
            };
            if temperature.is_some() {
                log::warn!("temperature has no effect on simulated rankers; ignoring it");
            }
            Ok(RankerSpec::Simulated {
                noise,
                text: args.text || f.text.unwrap_or(false),
                style,
            })
        }
        RankerKind::Remote => {
            let r = &file.remote;
            let d = EndpointConfig::default();
            let endpoint = EndpointConfig {
                base_url: args.base_url.clone().or_else(|| r.base_url.clone()).unwrap_or(d.base_url),
                model: args.model.clone().or_else(|| r.model.clone()).unwrap_or(d.model),
                temperature: temperature.unwrap_or(d.temperature),
                timeout_secs: args.timeout_secs.or(r.timeout_secs).unwrap_or(d.timeout_secs),
                max_in_flight: args.max_in_flight.or(r.max_in_flight).unwrap_or(d.max_in_flight),
                max_attempts: args.max_attempts.or(r.max_attempts).unwrap_or(d.max_attempts),
                initial_backoff_ms: r.initial_backoff_ms.unwrap_or(d.initial_backoff_ms),
                credential_env: args
                    .credential_env
                    .clone()
                    .or_else(|| r.credential_env.clone())
                    .unwrap_or(d.credential_env),
                char_budget: args.char_budget.or(r.char_budget),
                audit_log: args.audit_log.clone().or_else(|| r.audit_log.clone()),
            };
            if endpoint.model.is_empty() {
                return Err(config_error("remote ranker needs a model name"));
            }
            if endpoint.max_attempts == 0 || endpoint.max_in_flight == 0 {
                return Err(config_error("max_attempts and max_in_flight must be at least 1"));
            }
            Ok(RankerSpec::Remote { endpoint, style })
        }
    }
}
