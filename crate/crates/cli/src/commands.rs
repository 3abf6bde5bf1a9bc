use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use permsc::bias::{normalize_matrix, uniformity_test, ReversionMatrix};
use permsc::datasets::{
    gen_mathsort, gen_wordsort, load_sentence_sort, metrics::ndcg_at_k, read_qrels, read_tasks, read_trec_run,
    trec::read_tsv_map, wordsort::parse_lexicon, write_tasks, write_trec_run, DatasetError, SortTask, TaskKind, TrecRun,
    DEFAULT_COUNT,
};
use permsc::noise::{convergence_experiment, NoiseModel};
use permsc::ranking::{kendall_tau, Ranking};
use permsc::stats::spearman;

use crate::config::{
    build_aggregator, kebab, parse_noise, resolve_common, resolve_psc, resolve_ranker, AggregatorKind, CommonArgs,
    FileConfig, PscArgs, RankerArgs, RankerSpec,
};
use crate::error::{config_error, CliResult};
use crate::experiment::{
    query_trace_rows, rank_tasks, rerank_run, summarize_runs, trace_rows, RankerFactory, TrecInputs,
};
use crate::manifest::{digest, RunDir, RunManifest};

pub const DEFAULT_DEPTH: usize = 100;
pub const DEFAULT_SIM_N: usize = 8;
pub const DEFAULT_SIM_TRIALS: usize = 500;
pub const DEFAULT_SIM_GRID: [usize; 5] = [1, 5, 25, 101, 201];
pub const DEFAULT_NDCG_K: usize = 10;

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn in_file<T>(path: &Path, result: Result<T, DatasetError>) -> anyhow::Result<T> {
    result.with_context(|| format!("{}", path.display()))
}

fn load_tasks(path: &Path) -> anyhow::Result<Vec<SortTask>> {
    in_file(path, read_tasks(open(path)?))
}

fn temperature_warning(args: &RankerArgs, file: &FileConfig, spec: &RankerSpec) -> Option<String> {
    let given = args.temperature.or(file.ranker.temperature).is_some();
    (given && spec.is_simulated()).then(|| "temperature has no effect on simulated rankers; ignored".to_string())
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// math, word or sentence.
    #[arg(value_parser = kebab::<TaskKind>)]
    pub kind: TaskKind,
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    pub count: usize,
    /// Sorted word list for word tasks; the bundled lexicon otherwise.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// JSONL passages for sentence tasks.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn cmd_gen(args: &GenArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    let mut inputs = Vec::new();
    let generated = match args.kind {
        TaskKind::Math => gen_mathsort(args.count, common.seed),
        TaskKind::Word => {
            let lexicon = match &args.lexicon {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                    inputs.push(digest("lexicon", path)?);
                    parse_lexicon(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
                }
                None => permsc::datasets::default_lexicon(),
            };
            gen_wordsort(&lexicon, args.count, common.seed)
        }
        TaskKind::Sentence => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| config_error("sentence tasks need --input"))?;
            inputs.push(digest("input", path)?);
            load_sentence_sort(open(path)?, common.seed)
        }
    };
    let tasks = generated.map_err(|e| match e {
        DatasetError::Line { .. } | DatasetError::Io(_) => crate::CliError::Runtime(e.into()),
        other => config_error(other),
    })?;
    let mut dir = RunDir::create(&common)?;
    let mut buf = Vec::new();
    write_tasks(&tasks, &mut buf).map_err(anyhow::Error::from)?;
    dir.write_bytes("tasks.jsonl", &buf)?;
    let mut manifest = RunManifest::new(
        "gen",
        common.seed,
        json!({
            "kind": args.kind,
            "count": args.count,
            "lexicon": args.lexicon.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "bundled".into()),
        }),
    )?;
    manifest.inputs = inputs;
    manifest.summary = json!({ "tasks": tasks.len() });
    Ok(dir.finish(manifest)?)
}

#[derive(Args, Debug)]
pub struct RankArgs {
    /// Task JSONL, as written by `gen`.
    #[arg(long, required_unless_present = "trec_run", conflicts_with = "trec_run")]
    pub dataset: Option<PathBuf>,
    /// First-stage TREC run to rerank.
    #[arg(long, requires_all = ["corpus", "queries"])]
    pub trec_run: Option<PathBuf>,
    /// `docid<TAB>text` passages.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// `qid<TAB>text` queries.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Judgments; the simulated ranker takes its truth from them.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Candidates reranked per query.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    #[command(flatten)]
    pub psc: PscArgs,
    #[command(flatten)]
    pub ranker: RankerArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn cmd_rank(args: &RankArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    let psc = resolve_psc(&args.psc, &file)?;
    let spec = resolve_ranker(&args.ranker, &file)?;
    if args.depth == 0 {
        return Err(config_error("depth must be at least 1"));
    }
    let factory = RankerFactory::from_spec(&spec)?;
    let mut manifest = RunManifest::new(
        "rank",
        common.seed,
        json!({ "psc": psc, "depth": args.depth, "input": if args.dataset.is_some() { "dataset" } else { "trec" } }),
    )?;
    manifest.ranker = Some(serde_json::to_value(&spec).map_err(anyhow::Error::from)?);
    manifest.warnings.extend(temperature_warning(&args.ranker, &file, &spec));

    if let Some(path) = &args.dataset {
        manifest.inputs.push(digest("dataset", path)?);
        let tasks = load_tasks(path)?;
        let (runs, failures) = rank_tasks(&tasks, &factory, &psc, common.seed);
        if runs.is_empty() && !tasks.is_empty() {
            return Err(anyhow!("every task failed; first error: {}", failures[0].error).into());
        }
        let mut dir = RunDir::create(&common)?;
        dir.write_jsonl("predictions.jsonl", runs.iter().map(|r| &r.prediction))?;
        dir.write_jsonl("traces.jsonl", trace_rows(&runs))?;
        manifest.summary = serde_json::to_value(summarize_runs(&runs, failures.len())).map_err(anyhow::Error::from)?;
        manifest.failures = failures;
        return Ok(dir.finish(manifest)?);
    }

    let run_path = args.trec_run.as_ref().expect("clap requires a dataset or a run");
    let corpus_path = args.corpus.as_ref().expect("clap requires a corpus");
    let queries_path = args.queries.as_ref().expect("clap requires queries");
    manifest.inputs.push(digest("run", run_path)?);
    manifest.inputs.push(digest("corpus", corpus_path)?);
    manifest.inputs.push(digest("queries", queries_path)?);
    let qrels = match &args.qrels {
        Some(p) => {
            manifest.inputs.push(digest("qrels", p)?);
            Some(in_file(p, read_qrels(open(p)?))?)
        }
        None => None,
    };
    if spec.is_simulated() && qrels.is_none() {
        return Err(config_error("the simulated ranker needs --qrels to rerank a TREC run"));
    }
    let inputs = TrecInputs {
        run: in_file(run_path, read_trec_run(open(run_path)?))?,
        corpus: in_file(corpus_path, read_tsv_map(open(corpus_path)?))?,
        queries: in_file(queries_path, read_tsv_map(open(queries_path)?))?,
        qrels,
    };
    let (runs, failures) = rerank_run(&inputs, &factory, &psc, args.depth, common.seed);
    if runs.is_empty() && !inputs.run.queries.is_empty() {
        return Err(anyhow!("every query failed; first error: {}", failures[0].error).into());
    }
    let mut reranked = TrecRun::new("permsc");
    for q in &runs {
        reranked.insert_ordered(q.qid.clone(), q.docs.iter().cloned());
    }
    let mut dir = RunDir::create(&common)?;
    let mut buf = Vec::new();
    write_trec_run(&reranked, &mut buf).map_err(anyhow::Error::from)?;
    dir.write_bytes("predictions.run", &buf)?;
    dir.write_jsonl("traces.jsonl", query_trace_rows(&runs))?;
    let mut summary = json!({
        "queries": runs.len() + failures.len(),
        "reranked": runs.len(),
        "failed": failures.len(),
        "calls": runs.iter().map(|q| q.calls).sum::<usize>(),
    });
    if let Some(qrels) = &inputs.qrels {
        summary["first_stage_ndcg"] = json!(ndcg_at_k(&inputs.run, qrels, DEFAULT_NDCG_K).mean);
        summary["reranked_ndcg"] = json!(ndcg_at_k(&reranked, qrels, DEFAULT_NDCG_K).mean);
    }
    manifest.summary = summary;
    manifest.failures = failures;
    Ok(dir.finish(manifest)?)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// List size of the true ranking.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sample counts, e.g. `1,5,25,101,201`.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Vec<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseModel>,
    #[arg(long, value_parser = kebab::<AggregatorKind>)]
    pub aggregator: Option<AggregatorKind>,
    #[arg(long)]
    pub rrf_k: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    let n = args.n.or(file.simulate.n).unwrap_or(DEFAULT_SIM_N);
    let trials = args.trials.or(file.simulate.trials).unwrap_or(DEFAULT_SIM_TRIALS);
    let grid = if args.m_grid.is_empty() {
        file.simulate.m_grid.clone().unwrap_or_else(|| DEFAULT_SIM_GRID.to_vec())
    } else {
        args.m_grid.clone()
    };
    let noise = match (&args.noise, &file.ranker.noise) {
        (Some(n), _) => n.clone(),
        (None, Some(spec)) => parse_noise(spec).map_err(config_error)?,
        (None, None) => NoiseModel::default(),
    };
    let base = resolve_psc(&PscArgs::default(), &file)?;
    let aggregator = match args.aggregator {
        Some(kind) => build_aggregator(
            kind,
            args.rrf_k.or(file.psc.rrf_k).unwrap_or(permsc::aggregation::DEFAULT_RRF_K),
            file.psc.exact_limit.unwrap_or(permsc::aggregation::DEFAULT_EXACT_LIMIT),
            file.psc.max_nodes.unwrap_or(0),
        )?,
        None => base.aggregator,
    };
    if n == 0 {
        return Err(config_error("n must be at least 1"));
    }
    permsc::noise::validate_grid(&grid).map_err(config_error)?;
    noise.validate(n).map_err(config_error)?;
    if trials == 0 {
        return Err(config_error("trials must be at least 1"));
    }
    let truth = Ranking::identity(n);
    let report = convergence_experiment(&truth, &noise, &grid, trials, &aggregator, common.seed)
        .map_err(anyhow::Error::from)?;
    let mut dir = RunDir::create(&common)?;
    dir.write_bytes("convergence.csv", report.to_csv().as_bytes())?;
    dir.write_json("convergence.json", &report)?;
    let mut manifest = RunManifest::new(
        "simulate",
        common.seed,
        json!({ "n": n, "m_grid": grid, "trials": trials, "noise": noise, "aggregator": aggregator }),
    )?;
    let ms: Vec<f64> = report.m_grid().iter().map(|&m| m as f64).collect();
    manifest.summary = json!({
        "recovery_rates": report.recovery_rates(),
        "spearman_m_recovery": spearman(&ms, &report.recovery_rates()),
    });
    Ok(dir.finish(manifest)?)
}

#[derive(Deserialize)]
struct TraceLine {
    raw_output: Ranking,
}

/// Read `raw_output` from every trace line, naming the line on errors.
pub fn read_trace_outputs<R: BufRead>(input: R) -> anyhow::Result<Vec<Ranking>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TraceLine = serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        out.push(row.raw_output);
    }
    Ok(out)
}

/// Fold raw outputs into a matrix over the first `crop` positions, or over
/// the full common length when no crop is given.
pub fn reversion_matrix(outputs: &[Ranking], crop: Option<usize>) -> anyhow::Result<ReversionMatrix> {
    let first = outputs.first().ok_or_else(|| anyhow!("traces hold no samples"))?;
    let n = crop.unwrap_or(first.len());
    let mut matrix = ReversionMatrix::new(n);
    for (k, out) in outputs.iter().enumerate() {
        if crop.is_none() && out.len() != n {
            bail!("sample {k} ranks {} items but the first ranks {n}; pass --crop", out.len());
        }
        matrix.add_output(out).with_context(|| format!("sample {k}"))?;
    }
    Ok(matrix)
}

#[derive(Args, Debug)]
pub struct BiasArgs {
    /// `traces.jsonl` from `rank`.
    #[arg(long)]
    pub traces: PathBuf,
    /// Restrict to the first K presented positions.
    #[arg(long)]
    pub crop: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn cmd_bias(args: &BiasArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    if args.crop == Some(0) {
        return Err(config_error("crop must be at least 1"));
    }
    let outputs = read_trace_outputs(open(&args.traces)?).with_context(|| args.traces.display().to_string())?;
    let matrix = normalize_matrix(reversion_matrix(&outputs, args.crop)?).map_err(anyhow::Error::from)?;
    let test = uniformity_test(&matrix).map_err(anyhow::Error::from)?;
    let mut dir = RunDir::create(&common)?;
    dir.write_bytes("reversions.csv", matrix.to_csv().as_bytes())?;
    dir.write_json("reversions.json", &matrix)?;
    dir.write_json("uniformity.json", &test)?;
    let mut manifest = RunManifest::new("bias", common.seed, json!({ "crop": args.crop }))?;
    manifest.inputs.push(digest("traces", &args.traces)?);
    manifest.summary = json!({
        "samples": matrix.samples,
        "n": matrix.n,
        "total_reversions": matrix.total_reversions(),
        "p_value": test.p_value,
    });
    Ok(dir.finish(manifest)?)
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    ranking: Ranking,
}

/// Kendall tau of each prediction against its gold order, in gold order.
/// Ids must match one to one.
pub fn score_predictions<R: BufRead>(predictions: R, gold: &[SortTask]) -> anyhow::Result<Vec<(String, f64)>> {
    let index: HashMap<&str, &SortTask> = gold.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut seen: BTreeMap<String, Ranking> = BTreeMap::new();
    for (i, line) in predictions.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(&line).with_context(|| format!("predictions line {}", i + 1))?;
        let Some(task) = index.get(p.id.as_str()) else {
            bail!("prediction {:?} has no gold task", p.id);
        };
        if p.ranking.len() != task.len() {
            bail!("prediction {:?} ranks {} items, gold has {}", p.id, p.ranking.len(), task.len());
        }
        if seen.insert(p.id.clone(), p.ranking).is_some() {
            bail!("prediction {:?} appears twice", p.id);
        }
    }
    gold.iter()
        .map(|t| {
            let p = seen
                .get(&t.id)
                .ok_or_else(|| anyhow!("gold task {:?} has no prediction", t.id))?;
            let tau = if t.len() < 2 { 1.0 } else { kendall_tau(p, &t.gold)? };
            Ok((t.id.clone(), tau))
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// `predictions.jsonl` from `rank`.
    #[arg(long, requires = "gold", conflicts_with_all = ["run", "qrels"])]
    pub predictions: Option<PathBuf>,
    /// Task JSONL holding gold orders.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// TREC run to score.
    #[arg(long, requires = "qrels")]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// nDCG cutoff.
    #[arg(long, default_value_t = DEFAULT_NDCG_K)]
    pub k: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    let mut manifest = RunManifest::new("eval", common.seed, json!({ "k": args.k }))?;
    if let (Some(pred), Some(gold)) = (&args.predictions, &args.gold) {
        manifest.inputs.push(digest("predictions", pred)?);
        manifest.inputs.push(digest("gold", gold)?);
        let tasks = load_tasks(gold)?;
        let scores = score_predictions(open(pred)?, &tasks).with_context(|| pred.display().to_string())?;
        let mut csv = String::from("id,tau\n");
        for (id, tau) in &scores {
            csv.push_str(&format!("{id},{tau}\n"));
        }
        let taus: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let mut dir = RunDir::create(&common)?;
        dir.write_bytes("scores.csv", csv.as_bytes())?;
        manifest.summary = json!({ "metric": "kendall-tau", "tasks": taus.len(), "mean": permsc::stats::mean(&taus) });
        return Ok(dir.finish(manifest)?);
    }
    let (Some(run_path), Some(qrels_path)) = (&args.run, &args.qrels) else {
        return Err(config_error("eval needs --predictions with --gold, or --run with --qrels"));
    };
    manifest.inputs.push(digest("run", run_path)?);
    manifest.inputs.push(digest("qrels", qrels_path)?);
    let run = in_file(run_path, read_trec_run(open(run_path)?))?;
    let qrels = in_file(qrels_path, read_qrels(open(qrels_path)?))?;
    let report = ndcg_at_k(&run, &qrels, args.k);
    let mut csv = String::from("qid,ndcg,flag\n");
    for q in &report.per_query {
        let flag = q
            .flag
            .map(|f| serde_json::to_value(f).expect("flag serialises").as_str().unwrap_or_default().to_string())
            .unwrap_or_default();
        csv.push_str(&format!("{},{},{flag}\n", q.qid, q.ndcg));
    }
    let mut dir = RunDir::create(&common)?;
    dir.write_bytes("ndcg.csv", csv.as_bytes())?;
    manifest.summary = json!({
        "metric": format!("ndcg@{}", args.k),
        "queries": report.per_query.len(),
        "flagged": report.per_query.iter().filter(|q| q.flag.is_some()).count(),
        "mean": report.mean,
    });
    Ok(dir.finish(manifest)?)
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Sample counts, e.g. `1,2,3,5,10,20`.
    #[arg(long, value_delimiter = ',', conflicts_with = "temperature_grid")]
    pub m_grid: Vec<usize>,
    /// Temperatures, forwarded to remote rankers only.
    #[arg(long, value_delimiter = ',')]
    pub temperature_grid: Vec<f64>,
    #[command(flatten)]
    pub psc: PscArgs,
    #[command(flatten)]
    pub ranker: RankerArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub param: &'static str,
    pub value: f64,
    pub ranked: usize,
    pub failed: usize,
    pub mean_tau: Option<f64>,
    pub median_individual_tau: Option<f64>,
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<PathBuf> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &file);
    let base = resolve_psc(&args.psc, &file)?;
    let spec = resolve_ranker(&args.ranker, &file)?;
    let m_grid = if args.m_grid.is_empty() { file.sweep.m_grid.clone().unwrap_or_default() } else { args.m_grid.clone() };
    let t_grid = if args.temperature_grid.is_empty() {
        file.sweep.temperature_grid.clone().unwrap_or_default()
    } else {
        args.temperature_grid.clone()
    };
    let points: Vec<(&'static str, f64)> = match (m_grid.is_empty(), t_grid.is_empty()) {
        (false, true) => {
            if m_grid.contains(&0) {
                return Err(config_error("sample counts must be at least 1"));
            }
            m_grid.iter().map(|&m| ("m", m as f64)).collect()
        }
        (true, false) => {
            if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(config_error("temperatures must be non-negative"));
            }
            t_grid.iter().map(|&t| ("temperature", t)).collect()
        }
        (true, true) => return Err(config_error("sweep needs a non-empty --m-grid or --temperature-grid")),
        (false, false) => return Err(config_error("give either an m grid or a temperature grid, not both")),
    };
    let mut manifest = RunManifest::new(
        "sweep",
        common.seed,
        json!({ "psc": base, "points": points.iter().map(|p| json!({ "param": p.0, "value": p.1 })).collect::<Vec<_>>() }),
    )?;
    manifest.ranker = Some(serde_json::to_value(&spec).map_err(anyhow::Error::from)?);
    manifest.warnings.extend(temperature_warning(&args.ranker, &file, &spec));
    if points[0].0 == "temperature" && spec.is_simulated() {
        let w = "temperature grid has no effect on simulated rankers; every point is identical".to_string();
        log::warn!("{w}");
        manifest.warnings.push(w);
    }
    manifest.inputs.push(digest("dataset", &args.dataset)?);
    let tasks = load_tasks(&args.dataset)?;

    let mut long = String::from("param,value,task,tau\n");
    let mut table = String::from("param,value,ranked,failed,mean_tau,median_individual_tau\n");
    let mut results = Vec::new();
    let simulated_factory = if spec.is_simulated() { Some(RankerFactory::from_spec(&spec)?) } else { None };
    for &(param, value) in &points {
        let mut psc = base.clone();
        let factory = match (&simulated_factory, &spec) {
            (Some(f), _) => FactoryRef::Borrowed(f),
            (None, RankerSpec::Remote { endpoint, style }) => {
                let mut endpoint = endpoint.clone();
                if param == "temperature" {
                    endpoint.temperature = value;
                }
                FactoryRef::Owned(RankerFactory::from_spec(&RankerSpec::Remote { endpoint, style: *style })?)
            }
            (None, RankerSpec::Simulated { .. }) => unreachable!("simulated factory is built up front"),
        };
        if param == "m" {
            psc.m = value as usize;
        }
        let (runs, failures) = rank_tasks(&tasks, factory.get(), &psc, common.seed);
        for r in &runs {
            if let Some(tau) = r.prediction.tau {
                long.push_str(&format!("{param},{value},{},{tau}\n", r.prediction.id));
            }
        }
        let s = summarize_runs(&runs, failures.len());
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{param},{value},{},{},{},{}\n",
            s.ranked,
            s.failed,
            opt(s.mean_tau),
            opt(s.median_individual_tau)
        ));
        results.push(SweepPoint {
            param,
            value,
            ranked: s.ranked,
            failed: s.failed,
            mean_tau: s.mean_tau,
            median_individual_tau: s.median_individual_tau,
        });
        manifest.failures.extend(failures.into_iter().map(|mut f| {
            f.id = format!("{param}={value}:{}", f.id);
            f
        }));
    }
    let xs: Vec<f64> = results.iter().map(|p| p.value).collect();
    let ys: Vec<f64> = results.iter().map(|p| p.mean_tau.unwrap_or(f64::NAN)).collect();
    let mut dir = RunDir::create(&common)?;
    dir.write_bytes("sweep.csv", long.as_bytes())?;
    dir.write_bytes("sweep_summary.csv", table.as_bytes())?;
    manifest.summary = json!({ "points": results, "spearman": spearman(&xs, &ys) });
    Ok(dir.finish(manifest)?)
}

/// A factory either borrowed from the sweep or built for one grid point.
enum FactoryRef<'a> {
    Borrowed(&'a RankerFactory),
    Owned(RankerFactory),
}

impl FactoryRef<'_> {
    fn get(&self) -> &RankerFactory {
        match self {
            FactoryRef::Borrowed(f) => f,
            FactoryRef::Owned(f) => f,
        }
    }
}
