use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use peelmeans::constraints::{assign, evaluate_candidates, ConstraintSpec};
use peelmeans::extension::{build_extension, run_kmeans_framework, Centers, ExtensionParams};
use peelmeans::generate::{gaussian_mixture, MixtureConfig};
use peelmeans::io::{
    read_candidates_jsonl, read_points_csv, sidecar_path, write_candidates_jsonl, write_points_csv, GroundTruth,
};
use peelmeans::oracle::{brute_opt2, brute_opt_k, check_case_lemmas, BRUTE2_LIMIT, BRUTEK_LIMIT};
use peelmeans::params::{epsilon_thresholds, failure_budget, Overrides, ParameterSet};
use peelmeans::reduction::{
    max_bisection, pad_vertex, reduce_to_points, verify_identity, GraphInstance, IDENTITY_LIMIT,
};
use peelmeans::sampler::{run_2means_visit, CandidatePair, ProvenanceRef, SamplerConfig};
use peelmeans::{Error, PointSet};

#[derive(Parser)]
#[command(name = "peelmeans", version, about = "Candidate centers for constrained 2-means and k-means")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-mixture instance with a ground-truth sidecar.
    Gen(GenArgs),
    /// Run the 2-means sampler and pick the best candidate pair.
    Run(RunArgs),
    /// Evaluate a saved candidate list.
    Eval(EvalArgs),
    /// Resolve and check the parameter schedule.
    Params(ParamsArgs),
    /// Embed a graph for balanced 2-means and check the cost identity.
    Reduce(ReduceArgs),
    /// Check the case-analysis inequalities on an instance.
    Lemmas(LemmasArgs),
    /// Run the k-means prefix framework with an extension plug-in.
    Extend(ExtendArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Distance between neighbouring centers in units of sigma.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Comma-separated cluster weights.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Fix cluster sizes from the weights instead of drawing labels.
    #[arg(long)]
    exact_counts: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Point file to write; the ground truth goes to `<stem>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long = "override-M")]
    m: Option<u64>,
    #[arg(long = "override-Na")]
    n_a: Option<u64>,
    #[arg(long = "override-Nb")]
    n_b: Option<u64>,
    #[arg(long = "override-N2")]
    n_2: Option<u64>,
    #[arg(long = "override-varsigma")]
    varsigma: Option<f64>,
    #[arg(long = "override-delta1")]
    delta1: Option<f64>,
    #[arg(long = "override-delta2")]
    delta2: Option<f64>,
    #[arg(long = "override-eta")]
    eta: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            delta2: self.delta2,
            varsigma: self.varsigma,
            delta1: self.delta1,
            eta: self.eta,
            m: self.m,
            n_a: self.n_a,
            n_b: self.n_b,
            n_2: self.n_2,
        }
    }
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Largest enumeration run exhaustively; larger ones are subsampled.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    no_vibrate: bool,
}

impl SamplerArgs {
    fn params(&self) -> Result<ParameterSet, Error> {
        ParameterSet::resolve(self.epsilon, &self.overrides.overrides())
    }

    fn config(&self) -> SamplerConfig {
        SamplerConfig { cap: self.cap, no_vibrate: self.no_vibrate, record_regions: false }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Headerless CSV, one point per line.
    #[arg(long)]
    points: PathBuf,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Repeat with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Compare against the exact optimum (n <= 20).
    #[arg(long)]
    oracle: bool,
    /// Write the candidate list of the first trial as JSONL.
    #[arg(long)]
    candidates_out: Option<PathBuf>,
    /// Include wall-clock times (makes the output run-dependent).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    points: PathBuf,
    /// JSONL candidate list as written by `run --candidates-out`.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value = "none")]
    constraint: String,
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    epsilon: f64,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Edge list: vertex count on the first line, then `i j` per edge.
    #[arg(long)]
    graph: PathBuf,
    /// Add an isolated vertex to odd graphs.
    #[arg(long)]
    pad: bool,
    /// Write the embedded points as CSV.
    #[arg(long)]
    points_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmasArgs {
    #[arg(long)]
    points: PathBuf,
    /// Ground-truth sidecar (defaults to the one next to the point file).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// First center; defaults to the sampler's `c(V_a)`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c1: Option<Vec<f64>>,
    /// Second center; defaults to the best pair sharing the first center.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c2: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// One of: brute, greedy, peel.
    #[arg(long, default_value = "greedy")]
    extension: String,
    #[arg(long, default_value = "none")]
    constraint: String,
    /// Compare against the exact optimum (n <= 12).
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status: 1 when a check ran and failed, 2 for bad input.
enum Failure {
    Validation(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_points(path: &Path) -> Result<PointSet, Failure> {
    read_points_csv(open(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => {
            let mut w = std::io::stdout().lock();
            match writeln!(w, "{text}").and_then(|_| w.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn parse_constraint(s: &str) -> Result<ConstraintSpec, Failure> {
    s.parse().map_err(|e: Error| Failure::Input(e.to_string()))
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let cfg = MixtureConfig {
        n: a.n,
        d: a.d,
        k: a.k,
        separation: a.separation,
        sigma: a.sigma,
        weights: a.weights,
        exact_counts: a.exact_counts,
        seed: a.seed,
    };
    let (points, truth) = gaussian_mixture(&cfg)?;
    let mut w = create(&a.out)?;
    write_points_csv(&mut w, &points)?;
    w.flush()?;
    let truth_path = sidecar_path(&a.out);
    emit(&Some(truth_path.clone()), &truth)?;
    emit(
        &None,
        &json!({
            "points": a.out,
            "truth": truth_path,
            "n": points.len(),
            "d": points.dim(),
            "k": truth.k,
            "sizes": truth.sizes(),
        }),
    )
}

fn exact_opt2(points: &PointSet, spec: &ConstraintSpec) -> Result<f64, Failure> {
    if points.len() > BRUTE2_LIMIT {
        return Err(Failure::Input(format!("--oracle needs n <= {BRUTE2_LIMIT}, got {}", points.len())));
    }
    Ok(brute_opt2(points, spec)?.cost)
}

fn ratio(cost: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        cost / opt
    } else if cost <= 1e-12 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let points = load_points(&a.points)?;
    let spec = parse_constraint(&a.constraint)?;
    let ps = a.sampler.params()?;
    let config = a.sampler.config();
    let opt = if a.oracle { Some(exact_opt2(&points, &spec)?) } else { None };
    let mut trials = Vec::new();
    let mut successes = 0;
    for t in 0..a.trials.max(1) {
        let seed = a.sampler.seed.wrapping_add(t);
        let mut pairs = Vec::new();
        let summary = run_2means_visit(&points, &ps, seed, &config, |c| pairs.push(c.to_owned()))?;
        let t0 = Instant::now();
        let best = evaluate_candidates(&points, &pairs, &spec)?;
        let evaluation = t0.elapsed();
        if t == 0 {
            if let Some(path) = &a.candidates_out {
                let mut w = create(path)?;
                write_candidates_jsonl(&mut w, &pairs)?;
                w.flush()?;
            }
        }
        let mut trial = json!({
            "seed": seed,
            "best_cost": best.result.cost,
            "best_index": best.index,
            "best": best.pair,
            "candidate_counts": {
                "phase1": summary.phase1_count,
                "bare": 1,
                "phase2": summary.phase2_count,
                "total": pairs.len(),
                "phase1_bound": summary.phase1_bound,
                "phase2_round_bound": summary.phase2_round_bound,
                "phase2_bound": summary.phase2_round_bound * summary.iteration_bound as f64,
            },
            "phase_iterations": summary.phase_iterations,
            "iteration_bound": summary.iteration_bound,
            "region_sizes": summary.region_sizes,
            "truncated": summary.truncated,
        });
        if let Some(opt) = opt {
            let r = ratio(best.result.cost, opt);
            let ok = r <= 1.0 + ps.epsilon;
            successes += usize::from(ok);
            trial["opt_cost"] = json!(opt);
            trial["ratio"] = json!(r);
            trial["success"] = json!(ok);
        }
        if a.timings {
            trial["wall_times"] = json!({
                "sampling_s": summary.timings.sampling.as_secs_f64(),
                "enumeration_s": summary.timings.enumeration.as_secs_f64(),
                "peeling_s": summary.timings.peeling.as_secs_f64(),
                "evaluation_s": evaluation.as_secs_f64(),
            });
        }
        trials.push(trial);
    }
    let mut report = json!({
        "epsilon": ps.epsilon,
        "seed": a.sampler.seed,
        "constraint": spec.to_string(),
        "cap": a.sampler.cap,
        "params": ps,
        "trials": trials,
    });
    if opt.is_some() {
        report["success_rate"] = json!(successes as f64 / a.trials.max(1) as f64);
    }
    emit(&a.out, &report)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let points = load_points(&a.points)?;
    let spec = parse_constraint(&a.constraint)?;
    let pairs = read_candidates_jsonl(open(&a.candidates)?)?;
    let best = evaluate_candidates(&points, &pairs, &spec)?;
    let mut report = json!({
        "constraint": spec.to_string(),
        "candidates": pairs.len(),
        "best_index": best.index,
        "best": best.pair,
        "best_cost": best.result.cost,
        "sizes": best.result.sizes(2),
    });
    if a.oracle {
        let opt = exact_opt2(&points, &spec)?;
        report["opt_cost"] = json!(opt);
        report["ratio"] = json!(ratio(best.result.cost, opt));
    }
    emit(&a.out, &report)
}

fn cmd_params(a: ParamsArgs) -> CmdResult {
    let ps = ParameterSet::resolve(a.epsilon, &a.overrides.overrides())?;
    let report = json!({
        "params": ps,
        "thresholds": epsilon_thresholds(&ps),
        "failure_budget": failure_budget(&ps),
        "iteration_bound_n1e6": ps.iteration_bound(1_000_000),
    });
    emit(&a.out, &report)?;
    if ps.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("parameter conditions violated: {}", ps.violations.join("; "))))
    }
}

fn cmd_reduce(a: ReduceArgs) -> CmdResult {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(&a.graph)?, &mut text)?;
    let mut g = GraphInstance::parse(&text)?;
    let padded = a.pad && g.n_vertices % 2 == 1;
    if padded {
        g = pad_vertex(&g);
    }
    let points = reduce_to_points(&g)?;
    if let Some(path) = &a.points_out {
        let mut w = create(path)?;
        write_points_csv(&mut w, &points)?;
        w.flush()?;
    }
    let mut report = json!({
        "n_vertices": g.n_vertices,
        "edges": g.edges.len(),
        "padded": padded,
        "dimension": points.dim(),
    });
    let mut holds = true;
    if g.n_vertices <= IDENTITY_LIMIT {
        let id = verify_identity(&g)?;
        holds = id.holds;
        report["identity"] = json!(id);
    } else {
        let b = max_bisection(&g)?;
        report["max_bisection"] = json!(b.cut);
    }
    emit(&a.out, &report)?;
    if holds {
        Ok(())
    } else {
        Err(Failure::Validation("cost identity failed".into()))
    }
}

fn load_truth(points_path: &Path, truth: &Option<PathBuf>) -> Result<GroundTruth, Failure> {
    let path = truth.clone().unwrap_or_else(|| sidecar_path(points_path));
    serde_json::from_reader(open(&path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_lemmas(a: LemmasArgs) -> CmdResult {
    let points = load_points(&a.points)?;
    let truth = load_truth(&a.points, &a.truth)?;
    if truth.k != 2 {
        return Err(Failure::Input(format!("lemma checks need a 2-cluster ground truth, got k = {}", truth.k)));
    }
    let ps = a.sampler.params()?;
    let (c1, c2) = match (a.c1, a.c2) {
        (Some(c1), Some(c2)) => (c1, c2),
        (c1, c2) => {
            let mut pairs: Vec<CandidatePair> = Vec::new();
            let summary = run_2means_visit(&points, &ps, a.sampler.seed, &a.sampler.config(), |c| {
                if !matches!(c.provenance, ProvenanceRef::Phase1 { .. }) {
                    pairs.push(c.to_owned());
                }
            })?;
            let c1 = c1.unwrap_or(summary.first_center);
            match c2 {
                Some(c2) => (c1, c2),
                None => {
                    let shared: Vec<CandidatePair> =
                        pairs.into_iter().map(|p| CandidatePair { c1: c1.clone(), ..p }).collect();
                    let best = evaluate_candidates(&points, &shared, &ConstraintSpec::Unconstrained)?;
                    (c1, best.pair.c2)
                }
            }
        }
    };
    let report = check_case_lemmas(&points, &truth.labels, &c1, &c2, &ps)?;
    let ok = report.all_pass();
    emit(&a.out, &json!({ "c1": c1, "c2": c2, "all_pass": ok, "report": report }))?;
    if ok {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().iter().map(|l| l.name.as_str()).collect();
        Err(Failure::Validation(format!("failed checks: {}", names.join(", "))))
    }
}

fn cmd_extend(a: ExtendArgs) -> CmdResult {
    let points = load_points(&a.points)?;
    let spec = parse_constraint(&a.constraint)?;
    let o = &a.sampler.overrides;
    let params = ExtensionParams::new(a.k, a.sampler.epsilon)?.with_sizes(o.m, o.n_a, o.n_b)?;
    let two_means = if a.extension == "peel" { Some(a.sampler.params()?) } else { None };
    let ext = build_extension(&a.extension, &spec, two_means.as_ref(), &a.sampler.config())?;
    let out = run_kmeans_framework(&points, ext.as_ref(), &params, a.sampler.seed, a.sampler.cap)?;
    let scored: Vec<(usize, f64)> = out
        .tuples
        .par_iter()
        .enumerate()
        .map(|(i, t)| assign(&points, t, &spec).map(|r| (i, r.cost)))
        .collect::<Result<_, _>>()?;
    let best = scored
        .iter()
        .copied()
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Failure::Input("no completed tuple admits a feasible assignment".into()))?;
    let centers: &Centers = &out.tuples[best.0];
    let mut report = json!({
        "k": a.k,
        "extension": ext.name(),
        "constraint": spec.to_string(),
        "params": params,
        "diagnostics": params.diagnostics(),
        "prefix_count": out.prefix_count,
        "prefix_bound": out.prefix_bound,
        "distinct_prefixes": out.distinct_prefixes,
        "failed_prefixes": out.failed_prefixes,
        "truncated": out.truncated,
        "tuples": out.tuples.len(),
        "declared_pair_bound": out.declared_pair_bound,
        "best_cost": best.1,
        "best_centers": centers,
    });
    if a.oracle {
        if points.len() > BRUTEK_LIMIT {
            return Err(Failure::Input(format!("--oracle needs n <= {BRUTEK_LIMIT}, got {}", points.len())));
        }
        let opt = brute_opt_k(&points, a.k, &spec)?.cost;
        report["opt_cost"] = json!(opt);
        report["ratio"] = json!(ratio(best.1, opt));
    }
    emit(&a.out, &report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Params(a) => cmd_params(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Lemmas(a) => cmd_lemmas(a),
        Command::Extend(a) => cmd_extend(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
