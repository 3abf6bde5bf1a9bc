//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use permsc::aggregation::{kemeny_exact, kemeny_solve, Aggregator, Budget, PreferenceMatrix};
use permsc::bias::{count_reversions, normalize_matrix, uniformity_test};
use permsc::datasets::{gen_mathsort, metrics::ndcg_at_k, Qrels, SortTask, TrecRun};
use permsc::noise::{convergence_experiment, NoiseModel, WindowMode};
use permsc::ranker::{parse_ranking_output, simulated::format_output, PromptStyle};
use permsc::ranking::{kendall_distance, kendall_tau_as, random_ranking, ItemList, Ranking};
use permsc::rng::seeded_rng;
use permsc::stats::spearman;
use permsc::Rational;
use permsc_cli::config::{resolve_psc, FileConfig, PscArgs, ResolvedPsc};
use permsc_cli::experiment::{rank_tasks, summarize_runs, Summary, TaskRun};
use permsc_cli::experiment::RankerFactory;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, outcome: Outcome) -> Outcome {
    let elapsed = start.elapsed();
    let note = |d: String| format!("{d}; {:.1}s", elapsed.as_secs_f64());
    match outcome {
        Ok(d) if elapsed <= limit => Ok(note(d)),
        Ok(d) => Err(note(format!("{d}; over the {}s limit", limit.as_secs()))),
        Err(d) => Err(note(d)),
    }
}

// ---- independent oracles ----

/// All permutations of `0..n` in lexicographic order.
fn lex_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

/// Pairs of items the two orders place differently, counted directly.
fn discordant(a: &[usize], b: &[usize]) -> u64 {
    let n = a.len();
    let mut pa = vec![0; n];
    let mut pb = vec![0; n];
    for i in 0..n {
        pa[a[i]] = i;
        pb[b[i]] = i;
    }
    let mut d = 0;
    for x in 0..n {
        for y in x + 1..n {
            if (pa[x] < pa[y]) != (pb[x] < pb[y]) {
                d += 1;
            }
        }
    }
    d
}

fn brute_force_kemeny(samples: &[Ranking], n: usize) -> (Vec<usize>, u64) {
    let mut best: Option<(Vec<usize>, u64)> = None;
    for p in lex_permutations(n) {
        let obj: u64 = samples.iter().map(|s| discordant(s.as_slice(), &p)).sum();
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((p, obj));
        }
    }
    best.unwrap()
}

// ---- shared simulated suite ----

const SUITE_SEED: u64 = 20_240_101;

fn suite_tasks() -> Vec<SortTask> {
    gen_mathsort(100, SUITE_SEED).unwrap()
}

fn suite_noise() -> NoiseModel {
    NoiseModel::window(3, 8)
}

fn psc(m: usize, aggregator: Aggregator) -> ResolvedPsc {
    let mut p = resolve_psc(
        &PscArgs {
            m: Some(m),
            ..PscArgs::default()
        },
        &FileConfig::default(),
    )
    .unwrap();
    p.aggregator = aggregator;
    p
}

fn run_suite(tasks: &[SortTask], m: usize, aggregator: Aggregator) -> (Vec<TaskRun>, Summary) {
    let (runs, failures) = rank_tasks(tasks, &RankerFactory::simulated(suite_noise()), &psc(m, aggregator), SUITE_SEED);
    assert!(failures.is_empty(), "{failures:?}");
    let summary = summarize_runs(&runs, 0);
    (runs, summary)
}

fn boost(s: &Summary) -> f64 {
    s.mean_tau.unwrap() - s.median_individual_tau.unwrap()
}

// ---- criteria ----

fn kemeny_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1);
    let mut mismatches = Vec::new();
    for instance in 0..200 {
        let n = rng.random_range(2..=7);
        let m = rng.random_range(1..=10);
        let samples: Vec<Ranking> = (0..m).map(|_| random_ranking(n, &mut rng).unwrap()).collect();
        let (oracle, oracle_obj) = brute_force_kemeny(&samples, n);
        let exact = kemeny_exact(&samples).unwrap();
        let solved = kemeny_solve(&PreferenceMatrix::build(&samples).unwrap(), Budget::unlimited());
        for (name, r) in [("exact", &exact), ("solve", &solved)] {
            if r.objective != oracle_obj || r.ranking.as_slice() != oracle.as_slice() || !r.exact {
                mismatches.push(format!("instance {instance} {name}"));
            }
        }
    }
    within(
        Duration::from_secs(30),
        start,
        check(mismatches.is_empty(), format!("200 instances, mismatches {mismatches:?}")),
    )
}

fn distance_machinery() -> Outcome {
    let mut checked = 0u64;
    for n in 1..=6 {
        let perms: Vec<Ranking> = lex_permutations(n)
            .into_iter()
            .map(|p| Ranking::from_zero_based(p).unwrap())
            .collect();
        for a in &perms {
            for b in &perms {
                let inv_sum: usize = a.invert().compose(b).unwrap().inversion_vector().iter().sum();
                let d = kendall_distance(a, b).unwrap();
                let direct = discordant(a.as_slice(), b.as_slice());
                if inv_sum as u64 != d || d != direct {
                    return Err(format!("n={n}: {a} vs {b}: inv {inv_sum}, d {d}, direct {direct}"));
                }
                if n >= 2 {
                    let pairs = (n * (n - 1) / 2) as i64;
                    let expected = Rational::new(pairs - 2 * direct as i64, pairs);
                    let tau = kendall_tau_as::<Rational>(a, b).unwrap();
                    if tau != expected {
                        return Err(format!("n={n}: tau {tau} != {expected}"));
                    }
                    if a == b && tau != Rational::from_integer(1) {
                        return Err(format!("tau({a}, {a}) = {tau}"));
                    }
                    if tau == Rational::from_integer(1) && a != b {
                        return Err(format!("tau 1 for distinct {a}, {b}"));
                    }
                    if *b == a.reversed() && tau != Rational::from_integer(-1) {
                        return Err(format!("tau({a}, reverse) = {tau}"));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} ordered pairs, n = 1..6"))
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let grid = [1, 5, 25, 101, 201];
    let report = convergence_experiment(
        &Ranking::identity(8),
        &NoiseModel::default(),
        &grid,
        500,
        &Aggregator::kemeny(),
        SUITE_SEED,
    )
    .map_err(|e| e.to_string())?;
    let rates = report.recovery_rates();
    let ms: Vec<f64> = grid.iter().map(|&m| m as f64).collect();
    let rho = spearman(&ms, &rates).unwrap_or(f64::NAN);
    let last = *rates.last().unwrap();
    within(
        Duration::from_secs(300),
        start,
        check(last >= 0.95 && rho > 0.9, format!("recovery {rates:?}, spearman {rho:.3}")),
    )
}

fn psc_beats_individuals(tasks: &[SortTask]) -> Outcome {
    let start = Instant::now();
    let (_, s) = run_suite(tasks, 20, Aggregator::kemeny());
    let (psc, med) = (s.mean_tau.unwrap(), s.median_individual_tau.unwrap());
    let rel = (psc - med) / med.abs();
    within(
        Duration::from_secs(120),
        start,
        check(rel >= 0.01, format!("PSC tau {psc:.4}, median individual {med:.4}, relative gain {:.1}%", rel * 100.0)),
    )
}

fn aggregate_size_trend(tasks: &[SortTask]) -> Outcome {
    let start = Instant::now();
    let grid = [1usize, 2, 3, 5, 10, 20];
    let scores: Vec<f64> = grid
        .iter()
        .map(|&m| run_suite(tasks, m, Aggregator::kemeny()).1.mean_tau.unwrap())
        .collect();
    let at = |m: usize| scores[grid.iter().position(|&g| g == m).unwrap()];
    let share = (at(5) - at(1)) / (at(20) - at(1));
    let ms: Vec<f64> = grid.iter().map(|&m| m as f64).collect();
    let rho = spearman(&ms, &scores).unwrap_or(f64::NAN);
    within(
        Duration::from_secs(300),
        start,
        check(
            share >= 0.5 && rho > 0.0,
            format!("scores {scores:.4?}, m=5 recovers {:.0}%, spearman {rho:.3}", share * 100.0),
        ),
    )
}

/// Per-instance objective dominance and the boost over the median run.
fn compare_with(tasks: &[SortTask], other: Aggregator) -> Result<(Summary, Summary, usize), String> {
    let (k_runs, k) = run_suite(tasks, 20, Aggregator::kemeny());
    let (o_runs, o) = run_suite(tasks, 20, other);
    let mut dominated = 0;
    for (a, b) in k_runs.iter().zip(&o_runs) {
        if a.samples != b.samples {
            return Err(format!("task {}: aggregators saw different samples", a.prediction.id));
        }
        dominated += (a.prediction.objective <= b.prediction.objective) as usize;
    }
    Ok((k, o, dominated))
}

fn kemeny_vs_rrf(tasks: &[SortTask]) -> Outcome {
    let (k, r, dominated) = compare_with(tasks, Aggregator::rrf())?;
    check(
        dominated == tasks.len() && boost(&k) >= boost(&r),
        format!(
            "objective dominance {dominated}/{}, boost kemeny {:.4} vs rrf {:.4}",
            tasks.len(),
            boost(&k),
            boost(&r)
        ),
    )
}

fn kemeny_vs_borda(tasks: &[SortTask]) -> Outcome {
    let (k, b, dominated) = compare_with(tasks, Aggregator::Borda)?;
    let (kt, bt) = (k.mean_tau.unwrap(), b.mean_tau.unwrap());
    check(
        dominated == tasks.len() && kt >= bt - 0.005,
        format!("objective dominance {dominated}/{}, tau kemeny {kt:.4} vs borda {bt:.4}", tasks.len()),
    )
}

fn ndcg_hand_check() -> Outcome {
    let mut qrels = Qrels::new();
    qrels.entry("q".into()).or_default().extend([("d1".to_string(), 1), ("d2".to_string(), 0)]);
    let mut run = TrecRun::new("t");
    run.insert_ordered("q", ["d2", "d1"]);
    let two_doc = ndcg_at_k(&run, &qrels, 10).mean;

    let mut graded = Qrels::new();
    let mut ideal = TrecRun::new("ideal");
    let mut rng = seeded_rng(8);
    for q in 0..20 {
        let judged: BTreeMap<String, i32> = (0..15).map(|d| (format!("d{d}"), rng.random_range(0..4))).collect();
        let mut docs: Vec<(&String, &i32)> = judged.iter().collect();
        docs.sort_by(|a, b| b.1.cmp(a.1));
        if docs[0].1 == &0 {
            continue;
        }
        ideal.insert_ordered(format!("q{q}"), docs.iter().map(|(d, _)| d.to_string()));
        graded.insert(format!("q{q}"), judged);
    }
    let report = ndcg_at_k(&ideal, &graded, 10);
    let all_one = report.per_query.iter().all(|s| s.ndcg == 1.0 && s.flag.is_none());
    check(
        (two_doc - 0.6309).abs() <= 1e-4 && all_one && report.mean == 1.0,
        format!("two-document {two_doc:.6}, ideal runs {} queries all 1.0: {all_one}", report.per_query.len()),
    )
}

fn reversion_conservation_and_calibration() -> Outcome {
    let tasks = gen_mathsort(20, 77).unwrap();
    let n = tasks[0].len();

    // conservation on noisy traces
    let (runs, _) = run_suite(&tasks, 20, Aggregator::kemeny());
    let samples: Vec<_> = runs.iter().flat_map(|r| r.samples.iter().cloned()).collect();
    let matrix = count_reversions(&samples, None).map_err(|e| e.to_string())?;
    let direct: u64 = samples
        .iter()
        .map(|s| discordant(&(0..n).collect::<Vec<_>>(), s.raw_output.as_slice()))
        .sum();
    if matrix.total_reversions() != direct {
        return Err(format!("reversions {} != kendall distances {direct}", matrix.total_reversions()));
    }

    // calibration under position-independent noise
    let unbiased = RankerFactory::simulated(NoiseModel::default());
    let mut passed = 0;
    for r in 0..100u64 {
        let (runs, _) = rank_tasks(&tasks, &unbiased, &psc(20, Aggregator::kemeny()), 5_000 + r);
        let samples: Vec<_> = runs.into_iter().flat_map(|r| r.samples).collect();
        let test = uniformity_test(&count_reversions(&samples, None).unwrap()).map_err(|e| e.to_string())?;
        passed += (test.p_value > 0.01) as usize;
    }

    // detection of a reversed middle window
    let (lo, hi) = (n.div_ceil(3), 2 * n / 3);
    let middle = RankerFactory::simulated(NoiseModel::PositionalWindow {
        lo,
        hi,
        mode: WindowMode::Reverse,
    });
    let (runs, _) = rank_tasks(&tasks, &middle, &psc(20, Aggregator::kemeny()), 9);
    let samples: Vec<_> = runs.into_iter().flat_map(|r| r.samples).collect();
    let biased = normalize_matrix(count_reversions(&samples, None).unwrap()).unwrap();
    let p = uniformity_test(&biased).unwrap().p_value;
    let norm = biased.normalized.as_ref().unwrap();
    let centre_above = (lo - 1..hi).all(|i| (i + 1..hi).all(|j| norm[i][j].is_some_and(|v| v > 0.0)));

    check(
        passed >= 98 && p < 1e-3 && centre_above,
        format!(
            "conservation {direct} exact; unbiased passes {passed}/100; middle window [{lo},{hi}] p = {p:.2e}, centre cells above mean: {centre_above}"
        ),
    )
}

fn parser_robustness() -> Outcome {
    let mut rng = seeded_rng(10);
    let garbage = ["I think", "[0]", "[99]", "[ x ]", "]", "[", "->", "ranked:", "[7a]", "\n", "and"];
    for case in 0..1000 {
        let n = rng.random_range(1..=20);
        let items = ItemList::from_texts((0..n).map(|i| format!("passage {i}")));
        let mut ids: Vec<usize> = random_ranking(n, &mut rng).unwrap().into_vec();
        ids.truncate(rng.random_range(1..=n));
        for _ in 0..rng.random_range(0..4) {
            let dup = ids[rng.random_range(0..ids.len())];
            ids.insert(rng.random_range(0..=ids.len()), dup);
        }
        let mut parts: Vec<String> = ids.iter().map(|i| format!("[{}]", i + 1)).collect();
        for _ in 0..rng.random_range(0..5) {
            let g = garbage[rng.random_range(0..garbage.len())].to_string();
            parts.insert(rng.random_range(0..=parts.len()), g);
        }
        let text = parts.join(" > ");
        let parsed = parse_ranking_output(&text, &items, PromptStyle::RankGpt)
            .map_err(|e| format!("case {case}: {text:?}: {e}"))?;
        let mut sorted = parsed.as_slice().to_vec();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(format!("case {case}: {text:?} gave {parsed}"));
        }
        let mut first = Vec::new();
        for &i in &ids {
            if !first.contains(&i) {
                first.push(i);
            }
        }
        if parsed.as_slice()[..first.len()] != first[..] {
            return Err(format!("case {case}: {text:?} lost the stated order"));
        }
    }
    for n in 1..=20 {
        for style in PromptStyle::ALL {
            let items = match style {
                PromptStyle::MathSort => ItemList::from_texts((0..n).map(|i| format!("{i} + {}", i * 3))),
                PromptStyle::WordSort => ItemList::from_texts((0..n).map(|i| format!("word{i}"))),
                _ => ItemList::from_texts((0..n).map(|i| format!("Sentence number {i}."))),
            };
            for _ in 0..10 {
                let order = random_ranking(n, &mut rng).unwrap();
                let text = format_output(style, &items, &order);
                let back = parse_ranking_output(&text, &items, style).map_err(|e| format!("{style} n={n}: {e}"))?;
                if back != order {
                    return Err(format!("{style} n={n}: {order} -> {text:?} -> {back}"));
                }
            }
        }
    }
    Ok("1000 fuzzed chains repaired to bijections; round trips exact for n <= 20 in all styles".into())
}

fn end_to_end_reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_permsc");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let p = |name: &str| dir.path().join(name).display().to_string();
    run(&["gen", "math", "--count", "30", "--seed", "11", "--run-dir", &p("gen")])?;
    let tasks = format!("{}/tasks.jsonl", p("gen"));
    for name in ["a", "b"] {
        run(&[
            "rank", "--dataset", &tasks, "--noise", "window:3-8", "--m", "20", "--seed", "11", "--text", "--run-dir",
            &p(name),
        ])?;
    }
    let same = |file: &str| -> Result<bool, String> {
        let read = |d: &str| std::fs::read(Path::new(&p(d)).join(file)).map_err(|e| e.to_string());
        Ok(read("a")? == read("b")?)
    };
    let files = ["predictions.jsonl", "traces.jsonl", "manifest.json"];
    let identical = files.iter().map(|f| same(f)).collect::<Result<Vec<_>, _>>()?;
    check(identical.iter().all(|&x| x), format!("{files:?} identical: {identical:?}"))
}

fn main() {
    let tasks = suite_tasks();
    let criteria: Vec<Criterion> = vec![
        ("Kemeny oracle equivalence", Box::new(kemeny_oracle_equivalence)),
        ("inversion / distance / tau machinery", Box::new(distance_machinery)),
        ("convergence of the Kemeny estimator", Box::new(convergence)),
        ("PSC beats the median individual run", Box::new(|| psc_beats_individuals(&tasks))),
        ("aggregate-size trend", Box::new(|| aggregate_size_trend(&tasks))),
        ("Kemeny vs RRF", Box::new(|| kemeny_vs_rrf(&tasks))),
        ("Kemeny vs Borda", Box::new(|| kemeny_vs_borda(&tasks))),
        ("nDCG@10 hand check", Box::new(ndcg_hand_check)),
        ("reversion conservation and calibration", Box::new(reversion_conservation_and_calibration)),
        ("parser robustness", Box::new(parser_robustness)),
        ("end-to-end reproducibility", Box::new(end_to_end_reproducibility)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
