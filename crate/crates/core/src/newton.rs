//! Damped Newton iteration with a backtracking residual-norm linesearch.

use serde::{Deserialize, Serialize};

use crate::deflation::DeflationOperator;
use crate::discretization::{euclid_norm, Problem};

/// Step lengths tried by the linesearch: `1, 1/2, ..., 2^-10`.
const LINESEARCH_STEPS: i32 = 11;
/// Extra iterations allowed to reach `abs_tol` after the relative test passes.
const POLISH_ITERS: usize = 10;
/// Iterates with entries beyond this are treated as divergent.
const BLOWUP: f64 = 1e3;
/// Relative merit decrease below which an iteration counts as stagnated.
const STAGNATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linesearch {
    L2,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub linesearch: Linesearch,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-8, rel_tol: 1e-6, max_iters: 100, linesearch: Linesearch::L2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Euclidean norm of the (undeflated) residual at every iterate.
    pub residual_norms: Vec<f64>,
    pub final_state: Vec<f64>,
    pub message: Option<String>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().unwrap_or(&f64::INFINITY)
    }
}

/// Newton's method on `problem` from `initial` (pinned on entry).
pub fn newton_solve(problem: &Problem, initial: &[f64], opts: &SolveOptions) -> SolveReport {
    solve_with(problem, initial, opts, None)
}

/// Shared Newton loop; with `deflation` the step is the deflated Newton step
/// and the linesearch merit is the deflated residual norm.
pub(crate) fn solve_with(
    problem: &Problem,
    initial: &[f64],
    opts: &SolveOptions,
    deflation: Option<&DeflationOperator>,
) -> SolveReport {
    let mut x = initial.to_vec();
    problem.pin(&mut x);
    let mut r = problem.residual(&x);
    let mut rn = euclid_norm(&r);
    let r0 = rn;
    let mut history = vec![rn];
    let mut polish_left: Option<usize> = None;
    let merit = |x: &[f64], rn: f64| match deflation {
        Some(d) => d.factor(problem, x) * rn,
        None => rn,
    };
    let fail = |x: Vec<f64>, history: Vec<f64>, it: usize, msg: String| SolveReport {
        converged: false,
        iterations: it,
        residual_norms: history,
        final_state: x,
        message: Some(msg),
    };

    for it in 0..=opts.max_iters {
        let abs_ok = rn <= opts.abs_tol;
        let rel_ok = rn <= opts.rel_tol * r0;
        if abs_ok || polish_left == Some(0) {
            return SolveReport {
                converged: true,
                iterations: it,
                residual_norms: history,
                final_state: x,
                message: (!abs_ok).then(|| "converged on the relative criterion only".into()),
            };
        }
        if rel_ok && polish_left.is_none() {
            polish_left = Some(POLISH_ITERS);
        }
        if it == opts.max_iters {
            break;
        }
        let jac = problem.jacobian(&x);
        let lu = match jac.lu() {
            Ok(lu) => lu,
            Err(e) => return fail(x, history, it, format!("linear solve failed: {e}")),
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut d = lu.solve(&neg).expect("dimensions match");
        if let Some(defl) = deflation {
            defl.adjust_step(problem, &x, &mut d);
        }
        if d.iter().any(|v| !v.is_finite()) {
            return fail(x, history, it, "non-finite Newton step".into());
        }

        let current = merit(&x, rn);
        let lambdas: Vec<f64> = match opts.linesearch {
            Linesearch::L2 => (0..LINESEARCH_STEPS).map(|k| 0.5f64.powi(k)).collect(),
            Linesearch::None => vec![1.0],
        };
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
        for lam in lambdas {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lam * b).collect();
            let rt = problem.residual(&xt);
            let rtn = euclid_norm(&rt);
            let m = merit(&xt, rtn);
            if !m.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|b| m < b.0) {
                best = Some((m, xt, rt, rtn));
            }
        }
        if opts.linesearch == Linesearch::L2 && best.as_ref().is_none_or(|b| b.0 >= current) {
            // Safeguarded quadratic backtracking below the dyadic grid.
            let mut lam = 0.5f64.powi(LINESEARCH_STEPS - 1);
            let slope = -2.0 * current * current;
            for _ in 0..30 {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lam * b).collect();
                let rt = problem.residual(&xt);
                let rtn = euclid_norm(&rt);
                let m = merit(&xt, rtn);
                if m.is_finite() && m < current {
                    best = Some((m, xt, rt, rtn));
                    break;
                }
                let phi = if m.is_finite() { m * m } else { f64::MAX };
                let fit = -slope * lam * lam / (2.0 * (phi - current * current - slope * lam));
                lam = fit.clamp(0.1 * lam, 0.5 * lam);
            }
        }
        let Some((m, xt, rt, rtn)) = best else {
            return fail(x, history, it, "linesearch produced no finite trial".into());
        };
        if opts.linesearch == Linesearch::L2 && m >= current * (1.0 - STAGNATION) {
            if polish_left.is_some() {
                // Relative criterion already met; accept the current iterate.
                polish_left = Some(0);
                continue;
            }
            return fail(x, history, it, "linesearch stagnated".into());
        }
        if xt.iter().any(|v| v.abs() > BLOWUP) {
            return fail(xt, history, it + 1, "iterate diverged".into());
        }
        x = xt;
        r = rt;
        rn = rtn;
        history.push(rn);
        if let Some(p) = polish_left.as_mut() {
            *p = p.saturating_sub(1);
        }
    }
    fail(x, history, opts.max_iters, "maximum iterations exceeded".into())
}
