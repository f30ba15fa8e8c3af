//! Stability of converged states from the spectrum of the interior Hessian,
//! and the analytic second-variation probe for OR states.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::banded::{BandCholesky, BandMatrix};
use crate::discretization::{euclid_norm, OrState, Problem, System};
use crate::error::{Error, Result};
use crate::params::ModelParams;

pub const EIGEN_TOL: f64 = 1e-8;
/// Interior sizes up to this use a dense symmetric eigensolver.
pub const DENSE_MAX: usize = 400;
const RESIDUAL_GATE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }

    pub fn from_eigenvalues(ev: &[f64], tol: f64) -> Self {
        if ev.iter().any(|v| v.abs() <= tol) {
            Verdict::Marginal
        } else if ev.iter().any(|&v| v < -tol) {
            Verdict::Unstable
        } else {
            Verdict::Stable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Algebraically smallest eigenvalues, ascending.
    pub smallest_eigenvalues: Vec<f64>,
    /// Number of eigenvalues below `-tol`.
    pub index: usize,
    pub verdict: Verdict,
}

/// Lowest `k` eigenpairs of a symmetric band matrix.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// `k` algebraically smallest eigenvalues of the interior Hessian at `x`.
pub fn hessian_spectrum(problem: &Problem, x: &[f64], k: usize) -> Result<StabilityReport> {
    hessian_spectrum_with_hint(problem, x, k, None)
}

/// As [`hessian_spectrum`], starting the shift search from `hint` (for
/// example the smallest eigenvalue at a neighbouring continuation step).
pub fn hessian_spectrum_with_hint(
    problem: &Problem,
    x: &[f64],
    k: usize,
    hint: Option<f64>,
) -> Result<StabilityReport> {
    let r = euclid_norm(&problem.residual(x));
    if r > RESIDUAL_GATE {
        return Err(Error::NotConverged(r));
    }
    let a = problem.interior_hessian(x);
    let mut k = k.max(1).min(a.n());
    loop {
        let values = smallest_eigenpairs(&a, k, hint)?.values;
        let index = values.iter().filter(|&&v| v < -EIGEN_TOL).count();
        if index == values.len() && k < a.n() && k < 256 {
            k = (2 * k).min(a.n());
            continue;
        }
        let verdict = Verdict::from_eigenvalues(&values, EIGEN_TOL);
        return Ok(StabilityReport { smallest_eigenvalues: values, index, verdict });
    }
}

/// Lowest `k` eigenpairs: dense for small matrices, shift-invert Lanczos otherwise.
pub fn smallest_eigenpairs(a: &BandMatrix, k: usize, hint: Option<f64>) -> Result<EigenPairs> {
    let k = k.min(a.n());
    if a.n() <= DENSE_MAX {
        return Ok(dense_smallest(a, k));
    }
    let scale = a.norm_inf().max(1.0);
    // Start just below zero (or the hint); the factorisation lowers it further as needed.
    let mut sigma = match hint {
        Some(h) => h - 1e-2 * (1.0 + h.abs()),
        None => -1e-6 * scale,
    };
    let mut last: Option<EigenPairs> = None;
    for _ in 0..6 {
        let (chol, s) = spd_shift(a, sigma)?;
        let (pairs, ok) = lanczos(a, &chol, k, scale);
        if ok {
            return Ok(pairs);
        }
        // Shift just below the current estimate of the lowest eigenvalue.
        let lo = pairs.values[0];
        let spread = (pairs.values[k - 1] - lo).abs().max(1e-6 * scale);
        sigma = (lo - 0.5 * spread.min(1.0 + lo.abs())).min(s);
        last = Some(pairs);
    }
    let pairs = last.expect("at least one pass ran");
    Ok(pairs)
}

/// Cholesky of `A - sigma I`, lowering `sigma` until it succeeds.
fn spd_shift(a: &BandMatrix, mut sigma: f64) -> Result<(BandCholesky, f64)> {
    let mut delta = 1e-3 * (1.0 + sigma.abs());
    for _ in 0..60 {
        if let Ok(c) = a.shifted(-sigma).cholesky() {
            return Ok((c, sigma));
        }
        sigma -= delta;
        delta *= 4.0;
    }
    Err(Error::NotPositiveDefinite(0))
}

fn dense_smallest(a: &BandMatrix, k: usize) -> EigenPairs {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut idx: Vec<usize> = (0..a.n()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    idx.truncate(k);
    EigenPairs {
        values: idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: idx.iter().map(|&i| eig.eigenvectors.column(i).iter().cloned().collect()).collect(),
    }
}

/// Lanczos with full reorthogonalisation on `(A - sigma I)^{-1}`; the Krylov
/// dimension grows until all `k` Ritz pairs pass an explicit residual test.
fn lanczos(a: &BandMatrix, chol: &BandCholesky, k: usize, scale: f64) -> (EigenPairs, bool) {
    let n = a.n();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7311).sin()).collect();
    let nv = euclid_norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut m_target = (3 * k + 20).min(n);
    let m_max = n.min(600);
    loop {
        while basis.len() < m_target {
            let mut w = chol.solve(&v).expect("dimension fixed");
            let al: f64 = w.iter().zip(&v).map(|(p, q)| p * q).sum();
            for _ in 0..2 {
                for b in basis.iter().chain(std::iter::once(&v)) {
                    let d: f64 = w.iter().zip(b).map(|(p, q)| p * q).sum();
                    w.iter_mut().zip(b).for_each(|(p, q)| *p -= d * q);
                }
            }
            basis.push(v.clone());
            alpha.push(al);
            let bn = euclid_norm(&w);
            if bn < 1e-14 * al.abs().max(1e-300) || basis.len() == n {
                m_target = basis.len();
                break;
            }
            beta.push(bn);
            v = w.iter().map(|x| x / bn).collect();
        }
        let m = basis.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut idx: Vec<usize> = (0..m).collect();
        // Largest Ritz values of the inverse are the smallest of A.
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        idx.truncate(k.min(m));
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        let mut ok = true;
        for &i in &idx {
            let th = eig.eigenvalues[i];
            let s = eig.eigenvectors.column(i);
            let mut u = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let c = s[j];
                u.iter_mut().zip(b).for_each(|(p, q)| *p += c * q);
            }
            let un = euclid_norm(&u);
            u.iter_mut().for_each(|p| *p /= un);
            let au = a.matvec(&u);
            // Rayleigh quotient is at least as accurate as sigma + 1/theta.
            let lam: f64 = au.iter().zip(&u).map(|(p, q)| p * q).sum();
            let res = euclid_norm(&au.iter().zip(&u).map(|(p, q)| p - lam * q).collect::<Vec<_>>());
            if !(th > 0.0) || res > 1e-10 * scale {
                ok = false;
            }
            values.push(lam);
            vectors.push(u);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let pairs = EigenPairs {
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        };
        if ok || m >= m_max || m == n || m < m_target {
            return (pairs, ok);
        }
        m_target = (2 * m).min(m_max);
    }
}

/// Smooth cutoff: 1 on `|y| <= 1 - 2 eta`, 0 on `|y| >= 1 - eta`, quintic in between.
pub fn quintic_cutoff(y: f64, eta: f64) -> f64 {
    let a = y.abs();
    if a <= 1.0 - 2.0 * eta {
        1.0
    } else if a >= 1.0 - eta {
        0.0
    } else {
        let t = (a - (1.0 - 2.0 * eta)) / eta;
        1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Perturbations `h = Q11' z`, `w = M1' z` at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondVariationProbe {
    pub cutoff_eta: f64,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub w: Vec<f64>,
}

impl SecondVariationProbe {
    /// Builds the probe from nodal central differences of the OR profile.
    pub fn new(state: &OrState, eta: f64) -> Self {
        let mesh = &state.mesh;
        let z: Vec<f64> = mesh.nodes.iter().map(|&y| quintic_cutoff(y, eta)).collect();
        let deriv = |f: &[f64]| -> Vec<f64> {
            let n = f.len();
            (0..n)
                .map(|i| {
                    if i == 0 {
                        (f[1] - f[0]) / mesh.h
                    } else if i == n - 1 {
                        (f[n - 1] - f[n - 2]) / mesh.h
                    } else {
                        (f[i + 1] - f[i - 1]) / (2.0 * mesh.h)
                    }
                })
                .collect()
        };
        let h = deriv(&state.q11).iter().zip(&z).map(|(a, b)| a * b).collect();
        let w = deriv(&state.m1).iter().zip(&z).map(|(a, b)| a * b).collect();
        Self { cutoff_eta: eta, z, h, w }
    }

    pub fn zero(state: &OrState) -> Self {
        let n = state.q11.len();
        Self { cutoff_eta: 0.0, z: vec![0.0; n], h: vec![0.0; n], w: vec![0.0; n] }
    }

    /// The full-system perturbation `(0, h, 0, w)` in interleaved layout.
    pub fn full_vector(&self) -> Vec<f64> {
        self.h.iter().zip(&self.w).flat_map(|(&h, &w)| [0.0, h, 0.0, w]).collect()
    }
}

/// Second variation of the full energy at an OR state in the off-axis
/// direction `(0, h, 0, w)`, integrated with three-point Gauss quadrature.
pub fn or_instability_probe(state: &OrState, params: &ModelParams, probe: &SecondVariationProbe) -> f64 {
    let mesh = &state.mesh;
    let dx = mesh.h;
    let (c, xi) = (params.c, params.xi);
    let gp = [(0.5 - 0.5 * 0.6f64.sqrt(), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.5 * 0.6f64.sqrt(), 5.0 / 18.0)];
    let mut total = 0.0;
    for e in 0..mesh.n_cells {
        let lerp = |f: &[f64], t: f64| (1.0 - t) * f[e] + t * f[e + 1];
        let dh = (probe.h[e + 1] - probe.h[e]) / dx;
        let dw = (probe.w[e + 1] - probe.w[e]) / dx;
        total += dx * (params.l1 * dh * dh + xi * params.l2 * dw * dw);
        for &(t, wt) in &gp {
            let (q, m) = (lerp(&state.q11, t), lerp(&state.m1, t));
            let (h, w) = (lerp(&probe.h, t), lerp(&probe.w, t));
            let f = 4.0 * h * h * (q * q - 1.0) + xi * w * w * (m * m - 1.0) + 2.0 * c * w * w * q
                - 4.0 * c * h * w * m;
            total += dx * wt * f;
        }
    }
    total
}

/// `v^T H v` with the full-system discrete Hessian at the embedded OR state.
pub fn hessian_quadratic_form(state: &OrState, params: &ModelParams, v: &[f64]) -> f64 {
    let p = Problem::new(state.mesh.clone(), *params, System::Full);
    let x = state.embed().to_dofs();
    let r = p.interior();
    let a = p.interior_hessian(&x);
    let vi = &v[r];
    a.matvec(vi).iter().zip(vi).map(|(p, q)| p * q).sum()
}

/// Dense eigen-decomposition helper used by tests and small problems.
pub fn dense_eigenvalues(a: &BandMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.to_dense()).eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rayleigh quotient `x^T A x / x^T x`.
pub fn rayleigh_quotient(a: &BandMatrix, x: &[f64]) -> f64 {
    let ax = DVector::from_vec(a.matvec(x));
    let xv = DVector::from_column_slice(x);
    ax.dot(&xv) / xv.dot(&xv)
}
