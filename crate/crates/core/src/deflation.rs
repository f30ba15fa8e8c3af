//! Deflated Newton iteration for discovering several solutions at fixed parameters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bulk::rho_star;
use crate::discretization::{euclid_norm, Problem, System};
use crate::newton::{newton_solve, solve_with, SolveOptions, SolveReport};

/// Minimum distance between a new solution and any known one.
pub const DISTINCT_TOL: f64 = 1e-4;

/// Multiplicative deflation `M(x) = prod_k (||x - x_k||^-p + shift)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationOperator {
    pub known_solutions: Vec<Vec<f64>>,
    pub power: f64,
    pub shift: f64,
}

impl Default for DeflationOperator {
    fn default() -> Self {
        Self { known_solutions: Vec::new(), power: 2.0, shift: 1.0 }
    }
}

impl DeflationOperator {
    pub fn new(known_solutions: Vec<Vec<f64>>) -> Self {
        Self { known_solutions, ..Default::default() }
    }

    pub fn push(&mut self, x: Vec<f64>) {
        self.known_solutions.push(x);
    }

    pub fn factor(&self, problem: &Problem, x: &[f64]) -> f64 {
        self.known_solutions
            .iter()
            .map(|k| problem.distance(x, k).powf(-self.power) + self.shift)
            .product()
    }

    pub fn min_distance(&self, problem: &Problem, x: &[f64]) -> f64 {
        self.known_solutions.iter().map(|k| problem.distance(x, k)).fold(f64::INFINITY, f64::min)
    }

    /// `grad M / M` over the interior unknowns.
    fn log_gradient(&self, problem: &Problem, x: &[f64]) -> Vec<f64> {
        let h = problem.mesh.h;
        let p = self.power;
        let mut g = vec![0.0; x.len()];
        for k in &self.known_solutions {
            let d = problem.distance(x, k);
            let m = d.powf(-p) + self.shift;
            let coef = -p * d.powf(-p - 2.0) * h / m;
            for i in problem.interior() {
                g[i] += coef * (x[i] - k[i]);
            }
        }
        g
    }

    /// Turns the Newton step `d0` for `r` into the Newton step for `M r`
    /// (Sherman-Morrison on the rank-one update of the Jacobian).
    pub fn adjust_step(&self, problem: &Problem, x: &[f64], d: &mut [f64]) {
        if self.known_solutions.is_empty() {
            return;
        }
        let g = self.log_gradient(problem, x);
        let gd: f64 = g.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
        let denom = 1.0 - gd;
        if denom.abs() > 1e-12 && denom.is_finite() {
            d.iter_mut().for_each(|v| *v /= denom);
        }
    }
}

/// Newton on the deflated residual. Convergence additionally requires the
/// undeflated residual below `abs_tol` and distance `>= 1e-4` from every
/// known solution.
pub fn deflated_solve(
    problem: &Problem,
    initial: &[f64],
    operator: &DeflationOperator,
    opts: &SolveOptions,
) -> SolveReport {
    let mut rep = solve_with(problem, initial, opts, Some(operator));
    if rep.converged {
        if rep.final_residual() > opts.abs_tol {
            rep.converged = false;
            rep.message = Some("residual above absolute tolerance".into());
        } else if operator.min_distance(problem, &rep.final_state) < DISTINCT_TOL {
            rep.converged = false;
            rep.message = Some("converged onto a known solution".into());
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovered {
    pub state: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    /// Name of the guess the solution was reached from.
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryOptions {
    /// Total number of deflated solves allowed.
    pub budget: usize,
    /// Consecutive deflated solves per guess.
    pub per_guess: usize,
    /// Add the `(Q12, M2)` flip of each full-system solution when it is new.
    pub include_flips: bool,
    pub solve: SolveOptions,
}

impl Default for DiscoveryOptions {
    fn default() -> Self {
        Self { budget: 200, per_guess: 4, include_flips: true, solve: SolveOptions::default() }
    }
}

/// Runs deflated Newton from each guess in turn, deflating every solution
/// found. Solutions in `known` are deflated but not returned.
pub fn discover_solutions(
    problem: &Problem,
    guesses: &[(String, Vec<f64>)],
    known: &[Vec<f64>],
    opts: &DiscoveryOptions,
) -> Vec<Discovered> {
    let mut op = DeflationOperator::new(known.to_vec());
    let mut found: Vec<Discovered> = Vec::new();
    let mut spent = 0;
    let record = |x: Vec<f64>, origin: &str, op: &mut DeflationOperator, found: &mut Vec<Discovered>| {
        let r = euclid_norm(&problem.residual(&x));
        if r <= opts.solve.abs_tol && op.min_distance(problem, &x) >= DISTINCT_TOL {
            op.push(x.clone());
            found.push(Discovered { energy: problem.energy(&x), state: x, residual: r, origin: origin.into() });
            true
        } else {
            false
        }
    };
    'outer: for (name, guess) in guesses {
        for attempt in 0..opts.per_guess {
            if spent >= opts.budget {
                break 'outer;
            }
            spent += 1;
            let mut rep = deflated_solve(problem, guess, &op, &opts.solve);
            if !rep.converged && attempt == 0 && !op.known_solutions.is_empty() {
                // The deflation factor reshapes the merit landscape; an
                // undeflated attempt may still reach a new solution.
                rep = newton_solve(problem, guess, &opts.solve);
                rep.converged &= op.min_distance(problem, &rep.final_state) >= DISTINCT_TOL;
            }
            if !rep.converged {
                break;
            }
            let x = rep.final_state;
            let flip = problem.flip(&x);
            record(x, name, &mut op, &mut found);
            if opts.include_flips && problem.system == System::Full {
                record(flip, &format!("{name}/flip"), &mut op, &mut found);
            }
        }
    }
    found
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Piecewise profile joining boundary data to plateau values over layers of width `w`.
fn plateau(y: f64, left: f64, inner: f64, right: f64, w: f64) -> f64 {
    if y < -1.0 + w {
        left + (inner - left) * smoothstep((y + 1.0) / w)
    } else if y > 1.0 - w {
        inner + (right - inner) * smoothstep((y - 1.0 + w) / w)
    } else {
        inner
    }
}

/// Profile with interior sign switches of `M1` at `switches` (smoothed over `w`).
fn switching(y: f64, switches: &[f64], w: f64) -> f64 {
    switches.iter().map(|&p| (-(y - p) / w).tanh()).product()
}

/// Named initial guesses: linear, plateau and switching states at the bulk
/// minima, rotating limit maps, sinusoidal off-axis perturbations of the
/// linear state and seeded random perturbations.
pub fn guess_suite(problem: &Problem, n_random: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let c = problem.params.c;
    let rs = rho_star(c);
    let ms = (1.0 + 2.0 * c * rs).sqrt();
    let w = (2.0 * problem.params.l1.sqrt() / ms).clamp(0.01, 0.5);
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let mut add = |name: String, f: &dyn Fn(f64) -> [f64; 4]| out.push((name, problem.sample(f)));

    add("linear".into(), &|y| [-y, 0.0, -y, 0.0]);
    for (tag, s) in [("plus", 1.0), ("minus", -1.0)] {
        add(format!("plateau-{tag}"), &|y| {
            [plateau(y, 1.0, rs, -1.0, w), 0.0, plateau(y, 1.0, s * ms, -1.0, w), 0.0]
        });
    }
    // Plateau at the bulk minima with a late jump to the right boundary data.
    for &p in &[-0.9, -0.5, 0.0, 0.5, 0.9] {
        for (tag, s) in [("plus", 1.0), ("minus", -1.0)] {
            add(format!("step-{tag}@{p}"), &move |y| {
                let t = 0.5 * (1.0 - ((y - p) / (0.5 * w)).tanh());
                let q = plateau(y, 1.0, rs, rs, w) * t - (1.0 - t);
                let m = plateau(y, 1.0, s * ms, s * ms, w) * t - (1.0 - t);
                [q, 0.0, m, 0.0]
            });
        }
    }
    // Interior jumps between the two bulk minima (M1 changes sign).
    let layouts: [&[f64]; 6] = [&[0.0], &[-0.5], &[0.5], &[-0.4, 0.4], &[-0.6, 0.0, 0.6], &[-0.3, 0.3]];
    for sw in layouts {
        for (tag, s) in [("plus", 1.0), ("minus", -1.0)] {
            let sw = sw.to_vec();
            let name = format!("switch-{tag}{sw:?}");
            add(name, &move |y| {
                let m = s * ms * switching(y, &sw, 0.5 * w);
                [plateau(y, 1.0, rs, -1.0, w), 0.0, plateau(y, 1.0, m, -1.0, w), 0.0]
            });
        }
    }
    if problem.system == System::Full {
        for winding in [1.0, 3.0] {
            for (tag, s) in [("plus", 1.0), ("minus", -1.0)] {
                add(format!("rotation-{tag}x{winding}"), &move |y| {
                    let phi = s * winding * PI * (y + 1.0) / 2.0;
                    let rq = plateau(y, 1.0, rs, 1.0, w);
                    let rm = plateau(y, 1.0, ms, 1.0, w);
                    [rq * (2.0 * phi).cos(), rq * (2.0 * phi).sin(), rm * phi.cos(), rm * phi.sin()]
                });
            }
        }
        // Independent odd windings of the Q and M phases.
        for a in [-3i32, -1, 1, 3] {
            for b in [-3i32, -1, 1, 3] {
                add(format!("twist{a:+}{b:+}"), &move |y| {
                    let t = PI * (y + 1.0) / 2.0;
                    let rq = plateau(y, 1.0, rs, 1.0, w);
                    let rm = plateau(y, 1.0, ms, 1.0, w);
                    let (th, ph) = (a as f64 * t, b as f64 * t);
                    [rq * th.cos(), rq * th.sin(), rm * ph.cos(), rm * ph.sin()]
                });
            }
        }
        for k in 1..=3 {
            for (tag, s) in [("plus", 1.0), ("minus", -1.0)] {
                add(format!("sine-{tag}{k}"), &move |y| {
                    let b = s * 0.5 * (k as f64 * PI * (y + 1.0) / 2.0).sin();
                    [-y, b, -y, b]
                });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_random {
        let coef: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let name = format!("random-{seed}-{i}");
        add(name, &move |y| {
            let mode = |k: usize| (k as f64 * PI * (y + 1.0) / 2.0).sin();
            let mut v = [-y, 0.0, -y, 0.0];
            for f in 0..4 {
                v[f] += 0.6 * (coef[3 * f] * mode(1) + coef[3 * f + 1] * mode(2) + coef[3 * f + 2] * mode(3));
            }
            v
        });
    }
    // Projection onto the OR layout can make guesses coincide.
    let mut unique: Vec<(String, Vec<f64>)> = Vec::new();
    for (n, g) in out {
        if unique.iter().all(|(_, u)| problem.distance(u, &g) > 1e-12) {
            unique.push((n, g));
        }
    }
    unique
}

/// Plain Newton from each guess without deflation; used for warm starts.
pub fn solve_from_guesses(problem: &Problem, guesses: &[(String, Vec<f64>)], opts: &SolveOptions) -> Vec<SolveReport> {
    guesses.iter().map(|(_, g)| newton_solve(problem, g, opts)).collect()
}
