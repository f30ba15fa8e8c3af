use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ferrobvp::asymptotics::{convergence_study, geometric_grid, ExpansionOrder};
use ferrobvp::bulk::bulk_critical_points;
use ferrobvp::continuation::{continue_in_l, diagram_emit, ContinuationOptions};
use ferrobvp::deflation::{discover_solutions, guess_suite, DiscoveryOptions};
use ferrobvp::discretization::euclid_norm;
use ferrobvp::gamma::{landmarks, minimise_limit_functional_with, transition_cost_with, CostTable, MetricOptions, Pair};
use ferrobvp::io::{fmt_f64, read_json, read_solution_csv, write_json, write_rows, write_solution, Manifest, SolutionSidecar};
use ferrobvp::newton::newton_solve;
use ferrobvp::stability::hessian_spectrum;
use ferrobvp::{Mesh, ModelParams, Problem, SolveOptions, System};

mod reproduce;

#[derive(Parser, Debug)]
#[command(name = "ferrobvp", version, about = "Solutions, stability and bifurcations of a one-dimensional ferronematic model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Homogeneous critical points of the bulk potential.
    Bulk(BulkArgs),
    /// Newton solve from a named guess or a solution CSV.
    Solve(SolveArgs),
    /// Deflated search for several solutions at fixed parameters.
    Deflate(DeflateArgs),
    /// Hessian eigenvalues for every solution in a directory.
    Stability(StabilityArgs),
    /// Continuation in l with bifurcation detection.
    Continue(ContinueArgs),
    /// Transition costs of the sharp-interface limit.
    Metric(MetricArgs),
    /// Convergence of the OR expansions in c.
    Asymptotics(AsymptoticsArgs),
    /// Regenerate the data behind one figure.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Serialize)]
struct BulkArgs {
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Sweep `c0:c1:n` instead of a single coupling.
    #[arg(long)]
    sweep: Option<String>,
    /// Directory for bulk.csv; prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Clone)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    l: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Solve the reduced OR system (Q12 = M2 = 0).
    #[arg(long)]
    or: bool,
    #[arg(long, default_value_t = 1000)]
    n_cells: usize,
}

impl ModelArgs {
    fn problem(&self) -> Result<Problem> {
        let params = ModelParams::new(self.l, self.l, self.c, self.xi)?;
        let system = if self.or { System::Or } else { System::Full };
        Ok(Problem::new(Mesh::new(self.n_cells)?, params, system))
    }
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// linear, plateau-plus, plateau-minus, random:<seed>, any guess-suite name, or a solution CSV.
    #[arg(long, default_value = "linear")]
    guess: String,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DeflateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random guesses added to the structured suite.
    #[arg(long, default_value_t = 4)]
    random: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct StabilityArgs {
    /// Directory holding solution CSV and JSON pairs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 6)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
struct ContinueArgs {
    #[arg(long)]
    c: f64,
    /// Parameter range `a:b`, marched from a to b.
    #[arg(long)]
    l_range: String,
    #[arg(long)]
    step: f64,
    #[arg(long)]
    or: bool,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long, default_value_t = 1000)]
    n_cells: usize,
    /// Full guess-suite search every this many steps (0 disables).
    #[arg(long, default_value_t = 10)]
    rediscover_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write every branch point as a solution CSV.
    #[arg(long)]
    dump_states: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MetricArgs {
    #[arg(long)]
    c: f64,
    /// `all` or a comma-separated list such as `p*->p**,p*->pb(1)`.
    #[arg(long, default_value = "all")]
    pairs: String,
    #[arg(long, default_value_t = 400)]
    grid: usize,
    /// Write the optimal polylines as CSV.
    #[arg(long)]
    paths: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AsymptoticsArgs {
    /// order0, order1 or order2.
    #[arg(long)]
    study: String,
    #[arg(long, default_value_t = 1e-3)]
    c_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    c_max: f64,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[arg(long, default_value_t = 1000)]
    n_cells: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ReproduceArgs {
    /// One of fig1, fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig10, fig11, fig12.
    figure: String,
    #[arg(long)]
    out: PathBuf,
}

/// Collects output paths and writes the run manifest.
pub struct Run {
    command: String,
    config: serde_json::Value,
    started_unix: f64,
    clock: Instant,
    outputs: Vec<String>,
}

impl Run {
    fn new(config: &impl Serialize) -> Result<Self> {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Ok(Self {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            config: serde_json::to_value(config)?,
            started_unix,
            clock: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    fn finish(self, dir: &Path) -> Result<()> {
        let manifest = Manifest {
            tool: "ferrobvp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            config: self.config,
            started_unix: self.started_unix,
            elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("expected a:b, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else { bail!("expected c0:c1:n, got {s:?}") };
    let (a, b, n): (f64, f64, usize) = (a.parse()?, b.parse()?, n.parse()?);
    if n < 2 || !(a.is_finite() && b.is_finite()) {
        bail!("sweep needs at least two finite points");
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn bulk_rows(cs: &[f64], xi: f64) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &c in cs {
        let params = ModelParams::new(1.0, 1.0, c, xi)?;
        for p in bulk_critical_points(&params) {
            let parity = p.parity.map_or("none", |q| q.as_str());
            rows.push(vec![fmt_f64(c), p.label.to_string(), parity.into(), fmt_f64(p.rho), fmt_f64(p.sigma), fmt_f64(p.energy)]);
        }
    }
    Ok(rows)
}

const BULK_HEADER: [&str; 6] = ["c", "branch", "parity", "rho", "sigma", "energy"];

fn cmd_bulk(a: &BulkArgs) -> Result<()> {
    let cs = match &a.sweep {
        Some(s) => parse_sweep(s)?,
        None => vec![a.c],
    };
    let rows = bulk_rows(&cs, a.xi)?;
    match &a.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let mut run = Run::new(a)?;
            let path = dir.join("bulk.csv");
            write_rows(&path, &BULK_HEADER, rows)?;
            run.record(&path);
            run.finish(dir)
        }
        None => {
            println!("{}", BULK_HEADER.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
            Ok(())
        }
    }
}

fn initial_guess(problem: &Problem, guess: &str) -> Result<Vec<f64>> {
    if let Some(seed) = guess.strip_prefix("random:") {
        let seed: u64 = seed.parse().context("random:<seed> needs an integer seed")?;
        let suite = guess_suite(problem, 1, seed);
        return Ok(suite.into_iter().find(|(n, _)| n.starts_with("random-")).expect("one random guess").1);
    }
    if let Some((_, x)) = guess_suite(problem, 0, 0).into_iter().find(|(n, _)| n == guess) {
        return Ok(x);
    }
    let path = Path::new(guess);
    if path.exists() {
        let state = read_solution_csv(path)?;
        if state.mesh.n_cells != problem.mesh.n_cells {
            bail!("guess file has {} cells, expected {}", state.mesh.n_cells, problem.mesh.n_cells);
        }
        let mut x = problem.dofs_of(&state);
        problem.pin(&mut x);
        return Ok(x);
    }
    bail!("unknown guess {guess:?}")
}

fn sidecar(problem: &Problem, x: &[f64], origin: Option<String>, k: usize) -> SolutionSidecar {
    let residual = euclid_norm(&problem.residual(x));
    SolutionSidecar {
        params: problem.params,
        system: problem.system.as_str().into(),
        n_cells: problem.mesh.n_cells,
        energy: problem.energy(x),
        residual,
        origin,
        stability: if k > 0 { hessian_spectrum(problem, x, k).ok() } else { None },
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let problem = a.model.problem()?;
    let x0 = initial_guess(&problem, &a.guess)?;
    ensure_dir(&a.out)?;
    let mut run = Run::new(a)?;
    let opts = SolveOptions { max_iters: a.max_iters, ..Default::default() };
    let rep = newton_solve(&problem, &x0, &opts);
    let side = sidecar(&problem, &rep.final_state, Some(a.guess.clone()), if rep.converged { 6 } else { 0 });
    let path = write_solution(&a.out, "solution", &problem.field_state(&rep.final_state), &side)?;
    run.record(&path);
    let hist = a.out.join("residuals.csv");
    write_rows(&hist, &["iteration", "residual"], rep.residual_norms.iter().enumerate().map(|(i, r)| vec![i.to_string(), fmt_f64(*r)]))?;
    run.record(&hist);
    run.finish(&a.out)?;
    if !rep.converged {
        bail!("Newton did not converge: {}", rep.message.unwrap_or_default());
    }
    println!("converged in {} iterations, energy {}, residual {:.3e}", rep.iterations, side.energy, side.residual);
    Ok(())
}

#[derive(Serialize)]
struct IndexEntry {
    name: String,
    energy: f64,
    residual: f64,
    origin: String,
    stability: Option<String>,
}

#[derive(Serialize)]
struct DeflationIndex {
    count: usize,
    solutions: Vec<IndexEntry>,
}

/// Writes each solution as `sol-NNN` sorted by energy plus `index.json`.
pub fn write_solution_set(run: &mut Run, dir: &Path, problem: &Problem, found: &[ferrobvp::deflation::Discovered]) -> Result<()> {
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&i, &j| found[i].energy.total_cmp(&found[j].energy));
    let mut entries = Vec::new();
    for (n, &i) in order.iter().enumerate() {
        let d = &found[i];
        let name = format!("sol-{n:03}");
        let side = sidecar(problem, &d.state, Some(d.origin.clone()), 0);
        let path = write_solution(dir, &name, &problem.field_state(&d.state), &side)?;
        run.record(&path);
        entries.push(IndexEntry { name, energy: d.energy, residual: d.residual, origin: d.origin.clone(), stability: None });
    }
    let index = dir.join("index.json");
    write_json(&index, &DeflationIndex { count: entries.len(), solutions: entries })?;
    run.record(&index);
    Ok(())
}

fn cmd_deflate(a: &DeflateArgs) -> Result<()> {
    let problem = a.model.problem()?;
    ensure_dir(&a.out)?;
    let mut run = Run::new(a)?;
    let guesses = guess_suite(&problem, a.random, a.seed);
    let opts = DiscoveryOptions { budget: a.budget, ..Default::default() };
    let found = discover_solutions(&problem, &guesses, &[], &opts);
    write_solution_set(&mut run, &a.out, &problem, &found)?;
    println!("found {} solutions", found.len());
    run.finish(&a.out)
}

fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let mut run = Run::new(a)?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&a.input)
        .with_context(|| format!("cannot read {}", a.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.with_extension("json").exists())
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no solution CSV/JSON pairs in {}", a.input.display());
    }
    for csv in entries {
        let json = csv.with_extension("json");
        let mut side: SolutionSidecar = read_json(&json)?;
        let state = read_solution_csv(&csv)?;
        let system = match side.system.as_str() {
            "or" => System::Or,
            "full" => System::Full,
            s => bail!("unknown system {s:?} in {}", json.display()),
        };
        let problem = Problem::new(state.mesh.clone(), side.params, system);
        let x = problem.dofs_of(&state);
        let report = hessian_spectrum(&problem, &x, a.k).with_context(|| format!("stability of {}", csv.display()))?;
        println!("{}: {} (index {}, lowest {:.6e})", csv.display(), report.verdict.as_str(), report.index, report.smallest_eigenvalues[0]);
        side.stability = Some(report);
        write_json(&json, &side)?;
        run.record(&json);
    }
    run.finish(&a.input)
}

fn cmd_continue(a: &ContinueArgs) -> Result<()> {
    let (l0, l1) = parse_range(&a.l_range)?;
    ensure_dir(&a.out)?;
    let mut run = Run::new(a)?;
    let system = if a.or { System::Or } else { System::Full };
    let opts = ContinuationOptions {
        n_cells: a.n_cells,
        xi: a.xi,
        seed: a.seed,
        rediscover_every: a.rediscover_every,
        keep_states: a.dump_states,
        ..Default::default()
    };
    let result = continue_in_l(a.c, l0, l1, a.step, system, &opts)?;
    write_continuation(&mut run, &a.out, &result, a.n_cells, a.xi)?;
    println!("{} branches, {} events", result.branches.len(), result.events.len());
    run.finish(&a.out)
}

pub fn write_continuation(
    run: &mut Run,
    dir: &Path,
    result: &ferrobvp::continuation::ContinuationResult,
    n_cells: usize,
    xi: f64,
) -> Result<()> {
    diagram_emit(result, dir)?;
    run.record(&dir.join("branches.csv"));
    run.record(&dir.join("events.csv"));
    let summary = dir.join("continuation.json");
    write_json(&summary, result)?;
    run.record(&summary);
    let mesh = Mesh::new(n_cells)?;
    for b in &result.branches {
        for p in &b.points {
            let Some(x) = &p.state else { continue };
            let params = ModelParams::new(p.l, p.l, result.c, xi)?;
            let problem = Problem::new(mesh.clone(), params, result.system);
            let side = sidecar(&problem, x, Some(format!("branch {}", b.id)), 0);
            let sub = dir.join("states").join(format!("branch-{:03}", b.id));
            let path = write_solution(&sub, &format!("l-{:.4}", p.l), &problem.field_state(x), &side)?;
            run.record(&path);
        }
    }
    Ok(())
}

fn parse_pairs(spec: &str) -> Result<Vec<Pair>> {
    if spec == "all" {
        return Ok(Pair::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| {
            let s = s.trim();
            Pair::ALL.into_iter().find(|p| p.label() == s).ok_or_else(|| {
                let known: Vec<&str> = Pair::ALL.iter().map(|p| p.label()).collect();
                anyhow!("unknown pair {s:?}; known: {}", known.join(", "))
            })
        })
        .collect()
}

fn cmd_metric(a: &MetricArgs) -> Result<()> {
    let pairs = parse_pairs(&a.pairs)?;
    if a.grid < 10 {
        bail!("grid must have at least 10 nodes per side");
    }
    let opts = MetricOptions { grid: a.grid, ..Default::default() };
    let lm = landmarks(a.c);
    let costs: Vec<(Pair, ferrobvp::gamma::TransitionCost)> = pairs
        .iter()
        .map(|&p| {
            let (x, y) = p.endpoints(&lm);
            (p, transition_cost_with(x, y, a.c, &opts))
        })
        .collect();
    let rows: Vec<Vec<String>> = costs.iter().map(|(p, t)| vec![p.label().into(), fmt_f64(t.cost), fmt_f64(t.grid_cost)]).collect();
    let Some(dir) = &a.out else {
        println!("pair,cost,grid_cost");
        for r in rows {
            println!("{}", r.join(","));
        }
        return Ok(());
    };
    ensure_dir(dir)?;
    let mut run = Run::new(a)?;
    let path = dir.join("costs.csv");
    write_rows(&path, &["pair", "cost", "grid_cost"], rows)?;
    run.record(&path);
    if a.paths {
        for (n, (_, t)) in costs.iter().enumerate() {
            let p = dir.join(format!("path-{n}.csv"));
            write_rows(&p, &["q11", "m1"], t.path.nodes.iter().map(|q| vec![fmt_f64(q.q11), fmt_f64(q.m1)]))?;
            run.record(&p);
        }
    }
    if pairs.len() == Pair::ALL.len() {
        let table = CostTable { c: a.c, costs: costs.iter().map(|(p, t)| (*p, t.cost)).collect() };
        let best = minimise_limit_functional_with(&table);
        let p = dir.join("limit_structure.json");
        write_json(&p, &best)?;
        run.record(&p);
    }
    run.finish(dir)
}

pub fn parse_order(s: &str) -> Result<ExpansionOrder> {
    match s {
        "order0" => Ok(ExpansionOrder::Zero),
        "order1" => Ok(ExpansionOrder::One),
        "order2" => Ok(ExpansionOrder::Two),
        _ => bail!("study must be order0, order1 or order2, got {s:?}"),
    }
}

#[derive(Serialize)]
struct SlopeFit {
    order: usize,
    slope_q11: f64,
    slope_m1: f64,
}

pub fn write_study(run: &mut Run, dir: &Path, order: ExpansionOrder, cs: &[f64], n_cells: usize) -> Result<()> {
    let study = convergence_study(cs, order, n_cells)?;
    let k = order.as_usize();
    let csv = dir.join(format!("order{k}.csv"));
    let rows = (0..cs.len()).map(|i| vec![fmt_f64(study.c[i]), fmt_f64(study.gap_q11[i]), fmt_f64(study.gap_m1[i])]);
    write_rows(&csv, &["c", "gap_q11", "gap_m1"], rows)?;
    run.record(&csv);
    let json = dir.join(format!("order{k}-slope.json"));
    write_json(&json, &SlopeFit { order: k, slope_q11: study.slope_q11, slope_m1: study.slope_m1 })?;
    run.record(&json);
    println!("order {k}: slopes Q11 {:.3}, M1 {:.3}", study.slope_q11, study.slope_m1);
    Ok(())
}

fn cmd_asymptotics(a: &AsymptoticsArgs) -> Result<()> {
    let order = parse_order(&a.study)?;
    if !(a.c_min > 0.0 && a.c_max <= 0.5 && a.c_min < a.c_max && a.points >= 2) {
        bail!("need 0 < c-min < c-max <= 0.5 and at least two points");
    }
    ensure_dir(&a.out)?;
    let mut run = Run::new(a)?;
    let cs = geometric_grid(a.c_min, a.c_max, a.points);
    write_study(&mut run, &a.out, order, &cs, a.n_cells)?;
    run.finish(&a.out)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FERROBVP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("FERROBVP_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("FERROBVP_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Bulk(a) => cmd_bulk(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Deflate(a) => cmd_deflate(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Continue(a) => cmd_continue(a),
        Command::Metric(a) => cmd_metric(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
        Command::Reproduce(a) => reproduce::run(&a.figure, &a.out, Run::new(a)),
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
