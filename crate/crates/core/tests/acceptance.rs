//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `FERROBVP_CRITERIA=1,2,5` runs a subset; `FERROBVP_STRICT=1` turns any
//! FAIL into a nonzero exit status.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ferrobvp::asymptotics::{
    convergence_study, f2, f2_star, geometric_grid, limit_map_l0, loglog_slope, p_poly, q_poly, ExpansionOrder,
    Rational, Sense,
};
use ferrobvp::bulk::{bulk_density, rho_star, solve_branch_cubic};
use ferrobvp::continuation::{continue_in_l, ContinuationOptions, ContinuationResult, EventKind};
use ferrobvp::deflation::{discover_solutions, guess_suite, Discovered, DiscoveryOptions};
use ferrobvp::discretization::diagnostics;
use ferrobvp::gamma::{cost_table, minimise_limit_functional_with, CostTable, MetricOptions, Pair, Phase};
use ferrobvp::newton::newton_solve;
use ferrobvp::stability::{hessian_quadratic_form, hessian_spectrum, or_instability_probe, SecondVariationProbe, Verdict};
use ferrobvp::{FieldState, Mesh, ModelParams, Parity, Problem, SolveOptions, System};

/// Worst violation of the maximum principle over every state checked.
#[derive(Default)]
struct MaxPrinciple {
    states: usize,
    worst_q: f64,
    worst_m: f64,
}

impl MaxPrinciple {
    fn check(&mut self, c: f64, s: &FieldState) {
        let rs = rho_star(c);
        let (bq, bm) = (rs * rs, 1.0 + 2.0 * c * rs);
        for i in 0..s.q11.len() {
            let q = s.q11[i].powi(2) + s.q12[i].powi(2);
            let m = s.m1[i].powi(2) + s.m2[i].powi(2);
            self.worst_q = self.worst_q.max(q - bq);
            self.worst_m = self.worst_m.max(m - bm);
        }
        self.states += 1;
    }
}

thread_local! {
    static MP: RefCell<MaxPrinciple> = RefCell::new(MaxPrinciple::default());
}

fn record(problem: &Problem, x: &[f64]) {
    let s = problem.field_state(x);
    MP.with(|m| m.borrow_mut().check(problem.params.c, &s));
}

fn record_all(problem: &Problem, found: &[Discovered]) {
    for d in found {
        record(problem, &d.state);
    }
}

fn record_continuation(r: &ContinuationResult) {
    let mesh = Mesh::new(1000).unwrap();
    for b in &r.branches {
        for p in &b.points {
            if let Some(x) = &p.state {
                let problem = Problem::new(mesh.clone(), ModelParams::symmetric(p.l, r.c).unwrap(), r.system);
                record(&problem, x);
            }
        }
    }
}

struct Verdicts {
    lines: Vec<(usize, bool)>,
}

impl Verdicts {
    fn report(&mut self, id: usize, name: &str, pass: bool, detail: String, t: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("C{id:<2} {tag} {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64());
        self.lines.push((id, pass));
    }
}

fn problem(l: f64, c: f64, system: System) -> Problem {
    Problem::new(Mesh::new(1000).unwrap(), ModelParams::symmetric(l, c).unwrap(), system)
}

fn discover(p: &Problem, random: usize) -> Vec<Discovered> {
    let found = discover_solutions(p, &guess_suite(p, random, 0), &[], &DiscoveryOptions::default());
    record_all(p, &found);
    found
}

fn c1_bulk(v: &mut Verdicts) {
    let t = Instant::now();
    let unit = ModelParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
    let f00 = bulk_density(0.0, 0.0, 0.0, 0.0, &unit);
    let f10 = bulk_density(1.0, 0.0, 0.0, 0.0, &unit);
    let mut worst: f64 = 0.0;
    for &xi in &[0.1, 0.5, 1.0, 2.0, 10.0] {
        for k in 0..=100 {
            let c = 0.05 * k as f64;
            let params = ModelParams::new(1.0, 1.0, c, xi).unwrap();
            let a = 1.0 + c * c / (2.0 * xi);
            for parity in [Parity::Even, Parity::Odd] {
                let s = parity.sign();
                for r in solve_branch_cubic(&params, parity).values() {
                    let res = (r * r * r - a * r - s * c / 4.0).abs();
                    worst = worst.max(res / (1.0 + a * r.abs() + r.abs().powi(3)));
                }
            }
        }
    }
    let rs0 = rho_star(0.0);
    let pass = f00 == 1.25 && f10 == 0.25 && worst <= 1e-12 && rs0 == 1.0;
    v.report(1, "bulk exactness", pass, format!("f(0,0)={f00}, f(1,0)={f10}, worst cubic residual {worst:.2e}, rho*(0)={rs0}"), t);
}

fn c2_variational(v: &mut Verdicts) {
    let t = Instant::now();
    let mut worst_g: f64 = 0.0;
    let mut worst_j: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut next = move || rng.gen_range(-0.5..0.5);
    for system in [System::Full, System::Or] {
        for _ in 0..20 {
            let (l, c) = (0.05 + 2.0 * (next() + 0.5), 5.0 * (next() + 0.5));
            let p = Problem::new(Mesh::new(40).unwrap(), ModelParams::symmetric(l, c).unwrap(), system);
            let mut x: Vec<f64> = p.sample(|y| [-y, 0.0, -y, 0.0]).iter().map(|u| u + next()).collect();
            p.pin(&mut x);
            let r = p.residual(&x);
            let jac = p.jacobian(&x);
            let eps = 1e-6;
            for i in p.interior() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += eps;
                xm[i] -= eps;
                let g = (p.energy(&xp) - p.energy(&xm)) / (2.0 * eps);
                worst_g = worst_g.max((g - r[i]).abs() / (1.0 + r[i].abs()));
                let (rp, rm) = (p.residual(&xp), p.residual(&xm));
                for k in p.interior() {
                    let d = (rp[k] - rm[k]) / (2.0 * eps);
                    worst_j = worst_j.max((d - jac.get(k, i)).abs() / (1.0 + jac.get(k, i).abs()));
                }
            }
        }
    }
    let pass = worst_g <= 1e-6 && worst_j <= 1e-5;
    v.report(2, "variational consistency", pass, format!("gradient error {worst_g:.2e}, Jacobian error {worst_j:.2e} over 40 states"), t);
}

fn c3_uniqueness(v: &mut Verdicts) {
    let t = Instant::now();
    let p = problem(10.0, 1.0, System::Full);
    // Twenty guesses: the three structured ones plus seventeen random.
    let mut guesses: Vec<(String, Vec<f64>)> = guess_suite(&p, 17, 3)
        .into_iter()
        .filter(|(n, _)| ["linear", "plateau-plus", "plateau-minus"].contains(&n.as_str()) || n.starts_with("random"))
        .collect();
    guesses.truncate(20);
    let found = discover_solutions(&p, &guesses, &[], &DiscoveryOptions::default());
    record_all(&p, &found);
    let mut detail = format!("{} guesses, {} solution(s)", guesses.len(), found.len());
    let mut pass = found.len() == 1;
    if let Some(d) = found.first() {
        let stable = hessian_spectrum(&p, &d.state, 4).map(|r| r.verdict == Verdict::Stable).unwrap_or(false);
        let s = p.field_state(&d.state);
        let dev = (0..s.q11.len())
            .map(|i| {
                let y = s.mesh.nodes[i];
                (s.q11[i] + y).abs().max(s.q12[i].abs()).max((s.m1[i] + y).abs()).max(s.m2[i].abs())
            })
            .fold(0.0, f64::max);
        detail += &format!(", stable={stable}, sup deviation {dev:.4} (bound 0.02)");
        pass &= stable && dev <= 0.02;
    }
    v.report(3, "uniqueness regime", pass, detail, t);
}

fn sup_deviation_from_linear(p: &Problem, x: &[f64]) -> f64 {
    let s = p.field_state(x);
    (0..s.q11.len())
        .map(|i| {
            let y = s.mesh.nodes[i];
            (s.q11[i] + y).abs().max(s.q12[i].abs()).max((s.m1[i] + y).abs()).max(s.m2[i].abs())
        })
        .fold(0.0, f64::max)
}

fn c4_laplace(v: &mut Verdicts) {
    let t = Instant::now();
    let ls = [10.0, 20.0, 40.0, 80.0];
    let mut devs = Vec::new();
    for &l in &ls {
        let p = problem(l, 1.0, System::Full);
        let rep = newton_solve(&p, &p.sample(|y| [-y, 0.0, -y, 0.0]), &SolveOptions::default());
        if !rep.converged {
            v.report(4, "Laplace-limit rate", false, format!("no convergence at l={l}"), t);
            return;
        }
        record(&p, &rep.final_state);
        devs.push(sup_deviation_from_linear(&p, &rep.final_state));
    }
    let slope = loglog_slope(&ls, &devs);
    let alpha: Vec<String> = ls.iter().zip(&devs).map(|(l, d)| format!("{:.3}", l * d)).collect();
    v.report(4, "Laplace-limit rate", (slope + 1.0).abs() <= 0.15, format!("slope {slope:.3}, l*deviation = [{}]", alpha.join(", ")), t);
}

fn c5_expansions(v: &mut Verdicts) {
    let t = Instant::now();
    let one = Rational::from_integer(1);
    let ends_exact = [f2(), f2_star(), p_poly(), q_poly()]
        .iter()
        .all(|p| p.eval_exact(one) == Rational::from_integer(0) && p.eval_exact(-one) == Rational::from_integer(0));
    let cs = geometric_grid(1e-3, 1e-1, 8);
    let mut pass = ends_exact;
    let mut parts = vec![format!("correctors vanish exactly: {ends_exact}")];
    for (order, target, tol) in [(ExpansionOrder::Zero, 1.0, 0.2), (ExpansionOrder::One, 2.0, 0.2), (ExpansionOrder::Two, 3.0, 0.3)] {
        match convergence_study(&cs, order, 1000) {
            Ok(s) => {
                let ok = (s.slope_q11 - target).abs() <= tol && (s.slope_m1 - target).abs() <= tol;
                pass &= ok;
                parts.push(format!("order {}: {:.2}/{:.2}", order.as_usize(), s.slope_q11, s.slope_m1));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("order {} failed: {e}", order.as_usize()));
            }
        }
    }
    v.report(5, "expansion orders", pass, parts.join(", "), t);
}

fn continuation(c: f64, l0: f64, l1: f64, step: f64) -> ContinuationResult {
    let opts = ContinuationOptions { keep_states: true, ..Default::default() };
    let r = continue_in_l(c, l0, l1, step, System::Full, &opts).expect("valid range");
    record_continuation(&r);
    r
}

fn c7_bifurcation_c1(v: &mut Verdicts, r: &ContinuationResult, t: Instant) {
    let p = problem(1.0, 1.0, System::Full);
    let forks: Vec<_> = r.events.iter().filter(|e| e.kind == EventKind::Pitchfork).collect();
    let located = forks.iter().any(|e| e.l_lo >= 1.25 - 0.02 - 1e-9 && e.l_hi <= 1.25 + 0.02 + 1e-9);
    let fork_text: Vec<String> = forks.iter().map(|e| format!("[{}, {}]", e.l_lo, e.l_hi)).collect();

    let mut unique = true;
    let mut worst_l = None;
    for k in 0..=170 {
        let l = ((1.3 + 0.01 * k as f64) * 1e12).round() / 1e12;
        let n = r.stable_at(l).len();
        if n != 1 {
            unique = false;
            worst_l.get_or_insert((l, n));
        }
    }
    let extra: Vec<String> = r
        .events
        .iter()
        .filter(|e| e.l_lo >= 0.5 - 1e-9 && e.l_hi <= 0.6 + 1e-9)
        .map(|e| format!("{}@[{}, {}]", e.kind.as_str(), e.l_lo, e.l_hi))
        .collect();

    // Stable children of the main pitchfork must be mutual flips.
    let mut flip_err: f64 = 0.0;
    let mut pairs = 0;
    for e in &forks {
        let (a, b) = (&r.branches[e.branches[1]], &r.branches[e.branches[2]]);
        for pa in &a.points {
            if let (Some(pb), Some(x)) = (b.point_at(pa.l), &pa.state) {
                if pa.verdict == Verdict::Stable {
                    let y = pb.state.as_ref().expect("states kept");
                    flip_err = flip_err.max(p.distance(&p.flip(x), y));
                    pairs += 1;
                }
            }
        }
    }
    let flips_ok = pairs > 0 && flip_err <= 1e-6;
    let pass = located && unique && !extra.is_empty() && flips_ok;
    let uniq_text = match worst_l {
        None => "exactly one stable branch on [1.3, 3.0]".to_string(),
        Some((l, n)) => format!("{n} stable branches at l={l}"),
    };
    let detail = format!(
        "pitchfork brackets {} (target 1.25 +- 0.02): {located}; {uniq_text}; events in [0.5, 0.6]: {}; flip distance {flip_err:.1e} over {pairs} stable pairs",
        fork_text.join(" "),
        if extra.is_empty() { "none".into() } else { extra.join(" ") }
    );
    v.report(7, "bifurcation c=1", pass, detail, t);
}

fn c8_bifurcation_c5(v: &mut Verdicts) {
    let t = Instant::now();
    let r = continuation(5.0, 3.0, 5.0, 0.015);
    let or_events: Vec<String> = r
        .events
        .iter()
        .filter(|e| r.branches[e.branches[0]].is_or() && e.kind != EventKind::Fold)
        .map(|e| format!("{}@[{}, {}]", e.kind.as_str(), e.l_lo, e.l_hi))
        .collect();
    let hit = r.events.iter().any(|e| {
        let b = &r.branches[e.branches[0]];
        b.is_or() && e.kind != EventKind::Fold && e.l_lo >= 4.46 - 0.03 - 1e-9 && e.l_hi <= 4.46 + 0.03 + 1e-9
    });
    v.report(8, "bifurcation c=5", hit, format!("OR stability changes: {}", or_events.join(" ")), t);
}

/// Interior sign changes of `M1` away from `|y| = 1`.
fn interior_layers(s: &FieldState, margin: f64) -> usize {
    let idx: Vec<usize> = (0..s.m1.len()).filter(|&i| s.mesh.nodes[i].abs() <= 1.0 - margin).collect();
    idx.windows(2).filter(|w| s.m1[w[0]].signum() != s.m1[w[1]].signum()).count()
}

fn c9_multiplicity(v: &mut Verdicts, c1: Option<&ContinuationResult>) {
    let t = Instant::now();
    let p1 = problem(0.01, 1.0, System::Or);
    let n1 = discover(&p1, 4).len();

    let p5 = problem(0.01, 5.0, System::Or);
    let f5 = discover(&p5, 4);
    let layers: Vec<usize> = f5.iter().map(|d| interior_layers(&p5.field_state(&d.state), 0.1)).collect();
    let has = |k: usize| layers.iter().any(|&n| n == k);
    let layered = has(0) && has(1) && layers.iter().any(|&n| n >= 2);

    // Branches continued from the start of the range or born at the main pitchfork.
    let pf = problem(0.2, 1.0, System::Full);
    let known: Vec<Vec<f64>> = c1
        .map(|r| {
            let forks: Vec<usize> = r
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Pitchfork)
                .flat_map(|e| e.branches[1..].to_vec())
                .collect();
            r.branches
                .iter()
                .filter(|b| b.birth.is_none() || forks.contains(&b.id))
                .filter_map(|b| b.point_at(0.2).and_then(|p| p.state.clone()))
                .collect()
        })
        .unwrap_or_default();
    let beyond = discover_solutions(&pf, &guess_suite(&pf, 4, 0), &known, &DiscoveryOptions::default());
    record_all(&pf, &beyond);

    let pass = n1 >= 4 && layered && beyond.len() >= 8;
    let mut counts = layers.clone();
    counts.sort();
    v.report(
        9,
        "multiplicity",
        pass,
        format!(
            "c=1 OR: {n1} solutions; c=5 OR interior layer counts {counts:?}; l=0.2 full: {} beyond {} continued branches",
            beyond.len(),
            known.len()
        ),
        t,
    );
}

fn or_minimiser(l: f64, c: f64) -> Option<(Problem, Vec<f64>)> {
    let p = problem(l, c, System::Or);
    let found = discover(&p, 4);
    let best = found.into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy))?;
    Some((p, best.state))
}

fn c10_or_instability(v: &mut Verdicts) {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [1.0, 5.0] {
        let Some((p, x)) = or_minimiser(0.01, c) else {
            pass = false;
            parts.push(format!("c={c}: no OR solution"));
            continue;
        };
        let or_state = p.field_state(&x).to_or();
        let full = problem(0.01, c, System::Full);
        let xe = full.dofs_of(&or_state.embed());
        record(&full, &xe);
        let lowest = hessian_spectrum(&full, &xe, 4).map(|r| r.smallest_eigenvalues[0]).unwrap_or(f64::NAN);
        let probe = SecondVariationProbe::new(&or_state, 0.1);
        let h = or_instability_probe(&or_state, &full.params, &probe);
        let q = hessian_quadratic_form(&or_state, &full.params, &probe.full_vector());
        let rel = (h - q).abs() / q.abs();
        let wide = or_instability_probe(&or_state, &full.params, &SecondVariationProbe::new(&or_state, 0.2));
        let ok = lowest < 0.0 && h < 0.0 && rel <= 1e-4;
        pass &= ok;
        parts.push(format!("c={c}: lowest eigenvalue {lowest:.3e}, H[h,w] {h:.4e}, v^T H v {q:.4e}, rel {rel:.1e}, H at eta=0.2 {wide:.4e}"));
    }
    v.report(10, "OR instability", pass, parts.join("; "), t);
}

const FIG_COSTS: [(Pair, f64); 5] = [
    (Pair::StarStar2, 3.008),
    (Pair::StarBPlus, 3.967),
    (Pair::Star2BMinus, 2.577),
    (Pair::StarBMinus, 0.455),
    (Pair::Star2BPlus, 2.591),
];

fn worst_rel(table: &CostTable, scale: f64) -> f64 {
    FIG_COSTS.iter().map(|(p, d)| (scale * table.get(*p) - d).abs() / d).fold(0.0, f64::max)
}

fn c11_gamma(v: &mut Verdicts) {
    let t = Instant::now();
    let opts = MetricOptions::default();
    let tables: Vec<CostTable> = [0.5, 1.0, 2.0, 5.0].iter().map(|&c| cost_table(c, &opts)).collect();
    let resolved = tables.iter().find(|tb| worst_rel(tb, 1.0) <= 0.05);
    let closest = tables.iter().min_by(|a, b| worst_rel(a, 1.0).total_cmp(&worst_rel(b, 1.0))).unwrap();
    let table = resolved.unwrap_or(closest);
    let d = |p| table.get(p);
    let chain = d(Pair::StarBMinus) < d(Pair::Star2BMinus)
        && d(Pair::Star2BMinus) < d(Pair::Star2BPlus)
        && d(Pair::Star2BPlus) < d(Pair::StarStar2)
        && d(Pair::StarStar2) < d(Pair::StarBPlus);
    let best = minimise_limit_functional_with(table);
    let pure = best.jumps == 0 && best.phases == vec![Phase::PStar];
    let err = worst_rel(table, 1.0);
    let costs: Vec<String> = FIG_COSTS.iter().map(|(p, _)| format!("{}={:.4}", p.label(), d(*p))).collect();
    let pass = resolved.is_some() && err <= 0.01 && chain && pure;
    v.report(
        11,
        "Gamma-limit costs",
        pass,
        format!(
            "coupling resolved: {} (closest c={}); costs {}; worst rel error {:.3}; ordering chain {chain}; J minimised by pure p*: {pure}; costs/sqrt(2) rel error {:.4}",
            resolved.map_or("none within 5%".into(), |tb| tb.c.to_string()),
            closest.c,
            costs.join(" "),
            err,
            worst_rel(table, std::f64::consts::FRAC_1_SQRT_2)
        ),
        t,
    );
}

fn c12_limit_maps(v: &mut Verdicts) {
    let t = Instant::now();
    let l: f64 = 0.01;
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [1.0, 5.0] {
        let p = problem(l, c, System::Full);
        let found = discover(&p, 4);
        let Some(best) = found.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) else {
            pass = false;
            parts.push(format!("c={c}: no solution"));
            continue;
        };
        let s = p.field_state(&best.state);
        let sense = if s.m2.iter().sum::<f64>() >= 0.0 { Sense::Plus } else { Sense::Minus };
        let lim = diagnostics(&limit_map_l0(&s.mesh, c, sense));
        let d = diagnostics(&s);
        let width = 5.0 * l.sqrt();
        let mut err_mod: f64 = 0.0;
        let mut err_phase: f64 = 0.0;
        for i in 0..s.q11.len() {
            if s.mesh.nodes[i].abs() > 1.0 - width {
                continue;
            }
            err_mod = err_mod
                .max((d.q_norm[i] - lim.q_norm[i]).abs() / lim.q_norm[i])
                .max((d.m_norm[i] - lim.m_norm[i]).abs() / lim.m_norm[i]);
            let g = d.twophi_minus_theta[i];
            let k = (g / (2.0 * PI)).round();
            err_phase = err_phase.max((g - 2.0 * PI * k).abs());
        }
        let ok = err_mod <= 0.02 && err_phase <= 0.05;
        pass &= ok;
        parts.push(format!("c={c}: {} solutions, modulus error {err_mod:.4}, 2phi-theta error {err_phase:.4} rad", found.len()));
    }
    v.report(12, "limit-map convergence", pass, parts.join("; "), t);
}

fn main() {
    let wanted: Option<Vec<usize>> =
        std::env::var("FERROBVP_CRITERIA").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let run = |id: usize| wanted.as_ref().is_none_or(|w| w.contains(&id));
    let mut v = Verdicts { lines: Vec::new() };

    if run(1) {
        c1_bulk(&mut v);
    }
    if run(2) {
        c2_variational(&mut v);
    }
    if run(3) {
        c3_uniqueness(&mut v);
    }
    if run(4) {
        c4_laplace(&mut v);
    }
    if run(5) {
        c5_expansions(&mut v);
    }
    let mut c1_run = None;
    if run(7) || run(9) {
        let t = Instant::now();
        let r = continuation(1.0, 3.0, 0.2, 0.01);
        if run(7) {
            c7_bifurcation_c1(&mut v, &r, t);
        }
        c1_run = Some(r);
    }
    if run(8) {
        c8_bifurcation_c5(&mut v);
    }
    if run(9) {
        c9_multiplicity(&mut v, c1_run.as_ref());
    }
    drop(c1_run);
    if run(10) {
        c10_or_instability(&mut v);
    }
    if run(11) {
        c11_gamma(&mut v);
    }
    if run(12) {
        c12_limit_maps(&mut v);
    }
    if run(6) {
        let t = Instant::now();
        let (n, q, m) = MP.with(|mp| {
            let mp = mp.borrow();
            (mp.states, mp.worst_q, mp.worst_m)
        });
        let pass = n > 0 && q <= 1e-6 && m <= 1e-6;
        v.report(6, "maximum principle", pass, format!("{n} converged states, worst excess |Q|^2 {q:.2e}, |M|^2 {m:.2e}"), t);
    }

    let passed = v.lines.iter().filter(|l| l.1).count();
    println!("acceptance: {passed}/{} criteria passed", v.lines.len());
    let strict = std::env::var("FERROBVP_STRICT").is_ok_and(|s| s == "1");
    if strict && passed < v.lines.len() {
        std::process::exit(1);
    }
}
