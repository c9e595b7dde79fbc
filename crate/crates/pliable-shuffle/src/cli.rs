//! Command-line front end: instance I/O, solver invocation, bound reports,
//! shuffle experiments, baseline comparisons, and a synthetic end-to-end
//! learning demo. All randomness flows from explicit seed flags; identical
//! arguments produce byte-identical output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::baselines::{self, DeliveryMode};
use crate::model::PicInstance;
use crate::shuffle::{
    self, build_outer, build_outer_recursive, verify_outer, OuterKind, ShuffleConfig,
};
use crate::solvers::{self, SolverError};

/// Exit codes: 0 ok, 1 usage, 2 verification failure, 3 infeasible config.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
    Infeasible(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Verification(m) | CliError::Infeasible(m) => m,
        }
    }
}

fn from_solver(e: SolverError) -> CliError {
    match e {
        SolverError::PostCheckFailed => CliError::Verification(e.to_string()),
        SolverError::Unsatisfiable(_) => CliError::Infeasible(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

/// Report text plus an optional CSV body (written to `--out` when given,
/// stdout otherwise).
#[derive(Debug, Clone)]
pub struct CmdResult {
    pub report: String,
    pub csv: Option<String>,
}

#[derive(Parser, Debug)]
#[command(
    name = "pliable-shuffle",
    about = "Constrained pliable index coding and two-layer data shuffling experiments",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a solver on an instance and print the verified scheme.
    Solve(SolveArgs),
    /// Sweep (n, p, c) grid: k0 bracket plus RandTrans trial means, as CSV.
    Bounds(BoundsArgs),
    /// Expected k-pattern counts and the k0 bracket for one parameter point.
    Patterns(PatternsArgs),
    /// Run the two-layer shuffling scheme from a config file, emit metrics CSV.
    Shuffle(ShuffleArgs),
    /// Matched-seed comparison: pliable vs uncoded vs greedy index coding.
    Compare(CompareArgs),
    /// Synthetic SGD learning demo comparing shuffling schemes.
    Demo(DemoArgs),
    /// Check an outer layer for biregularity and C4-freeness.
    VerifyOuter(VerifyOuterArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "sec3b")]
    instance: Option<PathBuf>,
    /// Use the two-group worst-case family with this n instead of a file.
    #[arg(long)]
    sec3b: Option<usize>,
    /// rand_trans | star_forest | two_step | decide_l1 | brute | chain_bound
    #[arg(long)]
    solver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the instance's per-message constraint.
    #[arg(long)]
    c: Option<usize>,
    /// Field order for brute-force search.
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Maximum code length for brute-force search.
    #[arg(long = "Lmax", default_value_t = 4)]
    lmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long = "n-list", value_delimiter = ',', default_value = "256,512,1024")]
    n_list: Vec<usize>,
    #[arg(long = "p-list", value_delimiter = ',', default_value = "0.5")]
    p_list: Vec<f64>,
    #[arg(long = "c-list", value_delimiter = ',', default_value = "1,2,4")]
    c_list: Vec<usize>,
    /// RandTrans trials per grid point.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PatternsArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// With k: print ln E[Y_k]; without: print the k0 bracket as JSON.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct ShuffleArgs {
    /// ShuffleConfig JSON file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    s: usize,
    #[arg(long, default_value_t = 10)]
    m1: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long = "T", default_value_t = 8)]
    t: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long = "T", default_value_t = 20)]
    t: usize,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyOuterArgs {
    /// Build the layer a ShuffleConfig JSON file asks for, then check it.
    #[arg(long, conflicts_with_all = ["d1", "primes", "reps"])]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    primes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    reps: Vec<usize>,
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((result, out)) => {
            if !result.report.is_empty() {
                println!("{}", result.report.trim_end());
            }
            if let Some(csv) = &result.csv {
                match out {
                    Some(path) => {
                        if let Err(e) = std::fs::write(&path, csv) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return 1;
                        }
                    }
                    None => print!("{csv}"),
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(CmdResult, Option<PathBuf>), CliError> {
    match cmd {
        Command::Solve(a) => {
            let out = a.out.clone();
            cmd_solve(a).map(|r| (r, out))
        }
        Command::Bounds(a) => {
            let out = a.out.clone();
            cmd_bounds(a).map(|r| (r, out))
        }
        Command::Patterns(a) => cmd_patterns(a).map(|r| (r, None)),
        Command::Shuffle(a) => {
            let out = a.out.clone();
            cmd_shuffle(a).map(|r| (r, out))
        }
        Command::Compare(a) => {
            let out = a.out.clone();
            cmd_compare(a).map(|r| (r, out))
        }
        Command::Demo(a) => {
            let out = a.out.clone();
            cmd_demo(a).map(|r| (r, out))
        }
        Command::VerifyOuter(a) => cmd_verify_outer(a).map(|r| (r, None)),
    }
}

fn load_instance(a: &SolveArgs) -> Result<PicInstance, CliError> {
    let inst = match (&a.instance, a.sec3b) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            PicInstance::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (None, Some(n)) => {
            crate::model::sec3b_instance(n).map_err(|e| CliError::Usage(e.to_string()))?
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --instance and --sec3b".into(),
            ))
        }
    };
    match a.c {
        Some(c) => inst.with_c(c).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(inst),
    }
}

fn cmd_solve(a: SolveArgs) -> Result<CmdResult, CliError> {
    let inst = load_instance(&a)?;
    let (report, json) = match a.solver.as_str() {
        "rand_trans" => {
            let sol = solvers::rand_trans(&inst, a.seed).map_err(from_solver)?;
            (
                format!("L = {}", sol.length()),
                Some(solvers::solution_json("rand_trans", &sol, a.seed)),
            )
        }
        "star_forest" => {
            let (sol, colors) = solvers::star_forest_partition(&inst).map_err(from_solver)?;
            (
                format!("L = {} (colors = {colors})", sol.length()),
                Some(solvers::solution_json("star_forest", &sol, a.seed)),
            )
        }
        "two_step" => {
            let (sol, (s1, s2)) = solvers::two_step_scheme(&inst, a.seed).map_err(from_solver)?;
            (
                format!("L = {} (step1 = {s1}, step2 = {s2})", sol.length()),
                Some(solvers::solution_json("two_step", &sol, a.seed)),
            )
        }
        "decide_l1" => match solvers::decide_l1(&inst).map_err(from_solver)? {
            Some(sol) => (
                "L = 1".to_string(),
                Some(solvers::solution_json("decide_l1", &sol, a.seed)),
            ),
            None => {
                return Err(CliError::Infeasible(
                    "no single-transmission scheme exists".into(),
                ))
            }
        },
        "brute" => {
            let found = solvers::brute_force_optimal(&inst, a.lmax, a.q, solvers::DEFAULT_ENUM_BUDGET)
                .map_err(from_solver)?;
            match found {
                Some((l, sol)) => (
                    format!("L = {l} (optimal over L <= {})", a.lmax),
                    Some(solvers::solution_json("brute", &sol, a.seed)),
                ),
                None => {
                    return Err(CliError::Infeasible(format!(
                        "no scheme of length <= {} over GF({})",
                        a.lmax, a.q
                    )))
                }
            }
        }
        "chain_bound" => {
            let (lower, chain) = solvers::chain_witness(&inst);
            let chain: Vec<usize> = chain.iter().map(|&i| i + 1).collect();
            (format!("lower bound = {lower} (witness clients {chain:?})"), None)
        }
        other => return Err(CliError::Usage(format!("unknown solver '{other}'"))),
    };
    Ok(CmdResult {
        report,
        csv: json.map(|j| j + "\n"),
    })
}

pub const BOUNDS_HEADER: &str = "m,n,p,c,k0,x1,x2,rand_trans_mean,n_over_c_log2_n\n";

fn cmd_bounds(a: BoundsArgs) -> Result<CmdResult, CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let mut csv = String::from(BOUNDS_HEADER);
    for &n in &a.n_list {
        for &p in &a.p_list {
            for &c in &a.c_list {
                let m = n;
                let bracket = solvers::k0_bracket(m, n, p, c).map_err(from_solver)?;
                let mut total = 0usize;
                let mut satisfiable = 0usize;
                for trial in 0..a.seeds {
                    let seed = a.seed.wrapping_add(trial);
                    let (inst, _) = crate::model::random_instance(m, n, p, c, seed)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    match solvers::rand_trans(&inst, seed) {
                        Ok(sol) => {
                            total += sol.length();
                            satisfiable += 1;
                        }
                        // Tiny draws can violate the c-constraint outright;
                        // they carry no count and are left out of the mean.
                        Err(SolverError::Unsatisfiable(_)) => {}
                        Err(e) => return Err(from_solver(e)),
                    }
                }
                let mean = if satisfiable > 0 {
                    total as f64 / satisfiable as f64
                } else {
                    f64::NAN
                };
                let reference = n as f64 / (c as f64 * (n as f64).log2());
                csv.push_str(&format!(
                    "{m},{n},{p},{c},{},{:.6},{:.6},{:.6},{:.6}\n",
                    bracket.k0, bracket.x1, bracket.x2, mean, reference
                ));
            }
        }
    }
    Ok(CmdResult {
        report: String::new(),
        csv: Some(csv),
    })
}

fn cmd_patterns(a: PatternsArgs) -> Result<CmdResult, CliError> {
    let report = match a.k {
        Some(k) => {
            let ln_e = solvers::expected_patterns(a.m, a.n, a.p, a.c, k).map_err(from_solver)?;
            format!("ln E[Y_{k}] = {ln_e:.9}")
        }
        None => {
            let b = solvers::k0_bracket(a.m, a.n, a.p, a.c).map_err(from_solver)?;
            serde_json::json!({
                "k0": b.k0,
                "x1": b.x1,
                "x2": b.x2,
                "in_window": b.in_window,
                "regime_warning": b.regime_warning,
            })
            .to_string()
        }
    };
    Ok(CmdResult { report, csv: None })
}

fn load_config(path: &PathBuf) -> Result<ShuffleConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    ShuffleConfig::from_json(&text).map_err(|e| CliError::Infeasible(e.to_string()))
}

fn cmd_shuffle(a: ShuffleArgs) -> Result<CmdResult, CliError> {
    let cfg = load_config(&a.config)?;
    let outer = build_outer(&cfg).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let mut report = format!(
        "G = {} groups, d1 = {}, d2 = {}, outer C4 violations = {}",
        cfg.groups(),
        cfg.d1(),
        cfg.d2(),
        outer.c4_violations.len()
    );
    let mut rows = Vec::new();
    let mut hamming_sum = 0.0;
    let mut decode_total = 0usize;
    let mut c_budget = 0usize;
    for run in 0..a.runs.max(1) {
        let outcome =
            shuffle::run_shuffle(&cfg, &outer, run).map_err(|e| CliError::Infeasible(e.to_string()))?;
        hamming_sum += outcome
            .history
            .avg_hamming()
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        decode_total += outcome.events.iter().map(Vec::len).sum::<usize>();
        c_budget = c_budget.max(outcome.c_budget_max);
        rows.extend(outcome.metrics);
    }
    let runs = a.runs.max(1);
    report.push_str(&format!(
        "\navg_hamming = {:.4}, decodes/run = {:.2}, max decoders per transmission = {c_budget} (budget rc = {})",
        hamming_sum / runs as f64,
        decode_total as f64 / runs as f64,
        cfg.r * cfg.m1 / cfg.r
    ));
    Ok(CmdResult {
        report,
        csv: Some(shuffle::metrics_csv(&rows)),
    })
}

pub const COMPARE_HEADER: &str = "run,iter,pliable,uncoded,index_coded\n";

fn cmd_compare(a: CompareArgs) -> Result<CmdResult, CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let cfg = ShuffleConfig::new(a.m, a.n, a.s, a.m1, a.r, a.t, a.seed, OuterKind::Random)
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let outer = build_outer(&cfg).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let mut csv = String::from(COMPARE_HEADER);
    let mut totals = [0usize; 3];
    let mut hamming = [0.0f64; 3];
    for run in 0..a.seeds as usize {
        let seed = a.seed.wrapping_add(run as u64);
        let pliable =
            shuffle::run_shuffle(&cfg, &outer, run).map_err(|e| CliError::Infeasible(e.to_string()))?;
        let uncoded = baselines::random_shuffle_baseline(a.m, a.n, a.s, a.t, DeliveryMode::Uncoded, seed)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let coded =
            baselines::random_shuffle_baseline(a.m, a.n, a.s, a.t, DeliveryMode::IndexCoded, seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        for iter in 0..a.t {
            let row = [
                pliable.metrics[iter].transmissions,
                uncoded.per_iteration[iter],
                coded.per_iteration[iter],
            ];
            csv.push_str(&format!("{run},{},{},{},{}\n", iter + 1, row[0], row[1], row[2]));
            for (t, v) in totals.iter_mut().zip(row) {
                *t += v;
            }
        }
        hamming[0] += pliable
            .history
            .avg_hamming()
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        hamming[1] += uncoded.avg_hamming;
        hamming[2] += coded.avg_hamming;
    }
    let runs = a.seeds as f64;
    let report = format!(
        "pliable/uncoded = {:.4}, index_coded/uncoded = {:.4}\navg_hamming: pliable {:.2}, uncoded {:.2}, index_coded {:.2}",
        totals[0] as f64 / totals[1] as f64,
        totals[2] as f64 / totals[1] as f64,
        hamming[0] / runs,
        hamming[1] / runs,
        hamming[2] / runs
    );
    Ok(CmdResult {
        report,
        csv: Some(csv),
    })
}

pub const DEMO_HEADER: &str = "scheme,run,iter,transmissions,error\n";

/// Synthetic stand-in for the paper's learning experiment: the m messages are
/// labeled points on the unit circle, workers run local logistic SGD on their
/// cached points, and the master averages. Compares static caches against the
/// pliable shuffling scheme with matched seeds. Demonstration only — no hard
/// accuracy claim.
fn cmd_demo(a: DemoArgs) -> Result<CmdResult, CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let mut csv = String::from(DEMO_HEADER);
    let mut wins = 0usize;
    for run in 0..a.seeds as usize {
        let seed = a.seed.wrapping_add(run as u64);
        let (static_err, pliable_err) = demo_pair(a.t, seed, run, &mut csv)
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        if static_err >= pliable_err {
            wins += 1;
        }
    }
    let report = format!(
        "pliable final error <= static in {wins}/{} paired seeds (soft check)",
        a.seeds
    );
    Ok(CmdResult {
        report,
        csv: Some(csv),
    })
}

/// Paired-seed wins of the shuffled arm (final error no worse than static)
/// over `seeds` demo runs; the soft ordering statistic cmd_demo reports.
pub fn demo_soft_check(t: usize, seeds: u64, seed: u64) -> Result<usize, CliError> {
    let mut csv = String::new();
    let mut wins = 0usize;
    for run in 0..seeds as usize {
        let (static_err, pliable_err) = demo_pair(t, seed.wrapping_add(run as u64), run, &mut csv)
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        if static_err >= pliable_err {
            wins += 1;
        }
    }
    Ok(wins)
}

struct DemoData {
    points: Vec<[f64; 2]>,
    labels: Vec<f64>,
}

fn demo_dataset(m: usize, seed: u64) -> DemoData {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let w = [phi.cos(), phi.sin()];
    let mut points = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for j in 0..m {
        let theta = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
        let x = [theta.cos(), theta.sin()];
        let y = if w[0] * x[0] + w[1] * x[1] >= 0.0 { 1.0 } else { -1.0 };
        points.push(x);
        labels.push(y);
    }
    DemoData { points, labels }
}

fn demo_error(w: &[f64; 2], data: &DemoData) -> f64 {
    let wrong = data
        .points
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| (w[0] * x[0] + w[1] * x[1]) * y <= 0.0)
        .count();
    wrong as f64 / data.points.len() as f64
}

fn demo_local_sgd(w0: &[f64; 2], cache: &crate::model::CacheState, data: &DemoData) -> [f64; 2] {
    let mut w = *w0;
    let lr = 0.5;
    for _ in 0..5 {
        for j in cache.iter_set() {
            let x = data.points[j];
            let y = data.labels[j];
            let margin = (w[0] * x[0] + w[1] * x[1]) * y;
            let g = -y / (1.0 + margin.exp());
            w[0] -= lr * g * x[0];
            w[1] -= lr * g * x[1];
        }
    }
    w
}

/// One paired run: identical config, outer layer, and initial caches; one arm
/// never shuffles, the other runs a shuffle iteration between rounds.
fn demo_pair(
    t: usize,
    seed: u64,
    run: usize,
    csv: &mut String,
) -> Result<(f64, f64), shuffle::ShuffleError> {
    let cfg = ShuffleConfig::new(32, 8, 4, 4, 2, t.max(1), seed, OuterKind::Random)?;
    let outer = build_outer(&cfg)?;
    let data = demo_dataset(cfg.m, seed ^ 0xda7a);
    let init = shuffle::init_caches(&cfg, &outer, seed ^ 0xcac4e)?;
    let mut finals = [0.0f64; 2];
    for (slot, (scheme, shuffled)) in [("none", false), ("pliable", true)].into_iter().enumerate() {
        let mut caches = init.clone();
        let mut w = [0.0f64, 0.0];
        let mut err = demo_error(&w, &data);
        csv.push_str(&format!("{scheme},{run},0,0,{err:.4}\n"));
        for iter in 1..=t {
            let locals: Vec<[f64; 2]> = caches
                .iter()
                .map(|cache| demo_local_sgd(&w, cache, &data))
                .collect();
            w = [0.0, 0.0];
            for lw in &locals {
                w[0] += lw[0] / locals.len() as f64;
                w[1] += lw[1] / locals.len() as f64;
            }
            let transmissions = if shuffled {
                let (next, trans, _) =
                    shuffle::shuffle_iteration(&caches, &cfg, &outer, seed.wrapping_add(iter as u64))?;
                caches = next;
                trans.len()
            } else {
                0
            };
            err = demo_error(&w, &data);
            csv.push_str(&format!("{scheme},{run},{iter},{transmissions},{err:.4}\n"));
        }
        finals[slot] = err;
    }
    Ok((finals[0], finals[1]))
}

fn cmd_verify_outer(a: VerifyOuterArgs) -> Result<CmdResult, CliError> {
    let (outer, d1, d2) = match (&a.config, a.d1) {
        (Some(path), None) => {
            let cfg = load_config(path)?;
            let outer = build_outer(&cfg).map_err(|e| CliError::Infeasible(e.to_string()))?;
            (outer, cfg.d1(), cfg.d2())
        }
        (None, Some(d1)) => {
            if a.primes.len() != a.reps.len() {
                return Err(CliError::Usage("--primes and --reps must pair up".into()));
            }
            let outer = build_outer_recursive(d1, &a.primes, &a.reps)
                .map_err(|e| CliError::Infeasible(e.to_string()))?;
            let d2 = a.reps.iter().product();
            (outer, d1, d2)
        }
        _ => {
            return Err(CliError::Usage(
                "provide either --config or --d1/--primes/--reps".into(),
            ))
        }
    };
    let report = verify_outer(&outer, d1, d2);
    let hist = outer.column_histogram();
    let text = format!(
        "workers = {}, groups = {}\nrows_regular = {}, cols_regular = {}, c4_free = {}\nviolating pairs = {}\ncolumn degree histogram = {:?}",
        outer.workers(),
        outer.groups(),
        report.rows_regular,
        report.cols_regular,
        report.c4_free,
        report.violating_pairs.len(),
        hist
    );
    Ok(CmdResult {
        report: text,
        csv: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(args: &[&str]) -> Result<CmdResult, CliError> {
        let cli = Cli::try_parse_from(args).expect("parse");
        dispatch(cli.command).map(|(r, _)| r)
    }

    #[test]
    fn solve_sec3b_needs_two() {
        let r = solve(&[
            "pliable-shuffle",
            "solve",
            "--sec3b",
            "4",
            "--solver",
            "rand_trans",
        ])
        .unwrap();
        assert_eq!(r.report, "L = 2");
        assert!(r.csv.unwrap().contains("\"L\":2"));
    }

    #[test]
    fn solve_unknown_solver_is_usage() {
        let e = solve(&["pliable-shuffle", "solve", "--sec3b", "4", "--solver", "magic"])
            .unwrap_err();
        assert_eq!(e.code(), 1);
    }

    #[test]
    fn solve_chain_bound_identical_requests() {
        let inst = PicInstance::new(3, 1, vec![vec![0, 1], vec![0, 1], vec![0, 1]]).unwrap();
        let path = std::env::temp_dir().join("pliable-cli-chain.json");
        std::fs::write(&path, inst.to_json()).unwrap();
        let r = solve(&[
            "pliable-shuffle",
            "solve",
            "--instance",
            path.to_str().unwrap(),
            "--solver",
            "chain_bound",
        ])
        .unwrap();
        assert!(r.report.starts_with("lower bound = 3"), "{}", r.report);
    }

    #[test]
    fn bounds_single_point_shape() {
        let cli = Cli::try_parse_from([
            "pliable-shuffle",
            "bounds",
            "--n-list",
            "2",
            "--p-list",
            "0.5",
            "--c-list",
            "1",
            "--seeds",
            "1",
        ])
        .unwrap();
        let (r, _) = dispatch(cli.command).unwrap();
        let csv = r.csv.unwrap();
        assert!(csv.starts_with(BOUNDS_HEADER));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn patterns_bracket_json() {
        let cli = Cli::try_parse_from([
            "pliable-shuffle",
            "patterns",
            "--m",
            "1024",
            "--n",
            "1024",
            "--p",
            "0.5",
        ])
        .unwrap();
        let (r, _) = dispatch(cli.command).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.report).unwrap();
        assert_eq!(v["k0"], 17);
        assert_eq!(v["in_window"], true);
    }

    #[test]
    fn shuffle_rejects_bad_divisibility_as_infeasible() {
        let path = std::env::temp_dir().join("pliable-cli-bad.json");
        std::fs::write(
            &path,
            r#"{"m":16,"n":6,"s":4,"m1":4,"r":3,"T":5,"seed":0,"outer":"random"}"#,
        )
        .unwrap();
        let cli =
            Cli::try_parse_from(["pliable-shuffle", "shuffle", "--config", path.to_str().unwrap()])
                .unwrap();
        let e = dispatch(cli.command).unwrap_err();
        assert_eq!(e.code(), 3);
        assert!(e.message().contains("divide m1"), "{}", e.message());
    }

    #[test]
    fn shuffle_fig3_metrics() {
        let path = std::env::temp_dir().join("pliable-cli-fig3.json");
        std::fs::write(
            &path,
            r#"{"m":16,"n":6,"s":4,"m1":4,"r":2,"T":5,"seed":1,"outer":"random"}"#,
        )
        .unwrap();
        let cli =
            Cli::try_parse_from(["pliable-shuffle", "shuffle", "--config", path.to_str().unwrap()])
                .unwrap();
        let (r, _) = dispatch(cli.command).unwrap();
        let csv = r.csv.unwrap();
        assert!(csv.starts_with("run,iter,transmissions,decodes,avg_hamming_running,c_budget_max\n"));
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[2], "4");
        }
    }

    #[test]
    fn compare_deterministic_and_schema_stable() {
        let args = [
            "pliable-shuffle",
            "compare",
            "--m",
            "100",
            "--n",
            "5",
            "--s",
            "10",
            "--m1",
            "10",
            "--r",
            "2",
            "--T",
            "2",
            "--seeds",
            "1",
        ];
        let cli = Cli::try_parse_from(args).unwrap();
        let (r1, _) = dispatch(cli.command).unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let (r2, _) = dispatch(cli.command).unwrap();
        assert_eq!(r1.csv, r2.csv);
        assert!(r1.csv.unwrap().starts_with(COMPARE_HEADER));
    }

    #[test]
    fn demo_t_zero_is_initial_model_only() {
        let cli = Cli::try_parse_from([
            "pliable-shuffle",
            "demo",
            "--T",
            "0",
            "--seeds",
            "2",
        ])
        .unwrap();
        let (r, _) = dispatch(cli.command).unwrap();
        let csv = r.csv.unwrap();
        assert!(csv.starts_with(DEMO_HEADER));
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[3], "0");
        }
    }

    #[test]
    fn verify_outer_recursive_flags() {
        let cli = Cli::try_parse_from([
            "pliable-shuffle",
            "verify-outer",
            "--d1",
            "2",
            "--primes",
            "3",
            "--reps",
            "3",
        ])
        .unwrap();
        let (r, _) = dispatch(cli.command).unwrap();
        assert!(r.report.contains("c4_free = true"), "{}", r.report);
    }
}
