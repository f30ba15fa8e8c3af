//! Spatially homogeneous critical points of the bulk potentials.
//!
//! In polar form `Q = rho (cos theta, sin theta)`, `M = sigma (cos phi, sin phi)`
//! the full bulk density reads
//!
//! ```text
//! f = (rho^2 - 1)^2 + (xi/4)(sigma^2 - 1)^2 - c rho sigma^2 cos(2 phi - theta)
//! ```
//!
//! Coupled critical points need `2 phi - theta` to be a multiple of `pi`; the
//! parity of that multiple selects one of the two depressed cubics
//! `rho^3 - a rho -+ c/4 = 0` with `a = 1 + c^2 / (2 xi)`, solved here with
//! Cardano's construction in complex arithmetic.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::params::ModelParams;

/// Imaginary residue tolerated on a Cardano root before it counts as complex.
const REALNESS_TOL: f64 = 1e-10;
/// Slack allowed on `1 +- 2 c rho / xi` before sigma is declared complex.
const SIGMA_RADICAND_TOL: f64 = 1e-12;

/// Whether `2 phi - theta` is an even or odd multiple of `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Sign `s` in `rho^3 - a rho - s c/4` and `sigma^2 = 1 + s 2 c rho / xi`.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// `cos(2 phi - theta)` on this branch.
    pub fn alignment(self) -> f64 {
        self.sign()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Real roots of one branch cubic together with the Cardano ingredients.
#[derive(Debug, Clone)]
pub struct CubicRoots {
    pub parity: Parity,
    /// Real roots, tagged with the index `k` of the cube root of unity used.
    pub roots: Vec<(usize, f64)>,
    /// `c^2/64 - (1/27)(1 + c^2/(2 xi))^3`.
    pub radicand: f64,
    /// The two cube roots `(Theta1, Theta2)` (even) or `(Lambda1, Lambda2)` (odd).
    pub theta_terms: (Complex64, Complex64),
}

impl CubicRoots {
    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|&(_, r)| r).collect()
    }

    pub fn largest(&self) -> f64 {
        self.roots.iter().map(|&(_, r)| r).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchLabel {
    TrivialZero,
    TrivialNematic,
    /// Coupled branch built from the `k`-th cube root of unity (1-based).
    Coupled { parity: Parity, k: usize },
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BranchLabel::TrivialZero => write!(f, "trivial-zero"),
            BranchLabel::TrivialNematic => write!(f, "trivial-nematic"),
            BranchLabel::Coupled { parity, k } => write!(f, "coupled-{}-{k}", parity.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkCriticalPoint {
    pub rho: f64,
    pub sigma: f64,
    /// `None` on the trivial branches where the angles are undetermined.
    pub parity: Option<Parity>,
    pub energy: f64,
    pub label: BranchLabel,
}

impl BulkCriticalPoint {
    /// Residual of the four algebraic critical-point equations with
    /// `theta = 0` and `phi` chosen according to the parity.
    pub fn residual(&self, params: &ModelParams) -> f64 {
        let phi = match self.parity {
            Some(Parity::Odd) => PI / 2.0,
            _ => 0.0,
        };
        polar_gradient(self.rho, self.sigma, 0.0, phi, params)
            .iter()
            .fold(0.0_f64, |acc, r| acc.max(r.abs()))
    }
}

/// Constants of the shifted potentials and the maximum-principle bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkMinimumInfo {
    /// Minimum of the full bulk potential.
    pub alpha: f64,
    /// Minimum of the OR bulk potential.
    pub beta: f64,
    pub rho_star: f64,
    /// `1 + 2 c rho_star`, the bound on `|M|^2`.
    pub m_bound_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Small,
    Large,
}

/// Bulk density in polar variables.
pub fn bulk_energy(rho: f64, sigma: f64, theta: f64, phi: f64, params: &ModelParams) -> f64 {
    let s2 = sigma * sigma;
    (rho * rho - 1.0).powi(2) + 0.25 * params.xi * (s2 - 1.0).powi(2)
        - params.c * rho * s2 * (2.0 * phi - theta).cos()
}

/// Bulk density of the full system in Cartesian components.
pub fn bulk_density(q11: f64, q12: f64, m1: f64, m2: f64, params: &ModelParams) -> f64 {
    let q2 = q11 * q11 + q12 * q12;
    let m2n = m1 * m1 + m2 * m2;
    (q2 - 1.0).powi(2) + 0.25 * params.xi * (m2n - 1.0).powi(2)
        - params.c * q11 * (m1 * m1 - m2 * m2)
        - 2.0 * params.c * q12 * m1 * m2
}

/// OR bulk potential `(Q11^2-1)^2 + (M1^2-1)^2/4 - c Q11 M1^2` (unit `xi`).
pub fn or_bulk_potential(q11: f64, m1: f64, c: f64) -> f64 {
    (q11 * q11 - 1.0).powi(2) + 0.25 * (m1 * m1 - 1.0).powi(2) - c * q11 * m1 * m1
}

/// Left-hand sides of the four polar critical-point equations.
fn polar_gradient(rho: f64, sigma: f64, theta: f64, phi: f64, p: &ModelParams) -> [f64; 4] {
    let c = p.c;
    let s2 = sigma * sigma;
    let r3 = rho * (rho * rho - 1.0);
    [
        4.0 * theta.cos() * r3 - c * s2 * (2.0 * phi).cos(),
        4.0 * theta.sin() * r3 - c * s2 * (2.0 * phi).sin(),
        p.xi * sigma * phi.cos() * (s2 - 1.0) - 2.0 * sigma * rho * c * (theta - phi).cos(),
        p.xi * sigma * phi.sin() * (s2 - 1.0) - 2.0 * sigma * rho * c * (theta - phi).sin(),
    ]
}

fn branch_cubic(rho: f64, a: f64, s: f64, c: f64) -> f64 {
    rho * rho * rho - a * rho - s * c / 4.0
}

/// One Newton step on the branch cubic, skipped when the derivative is tiny.
fn polish(rho: f64, a: f64, s: f64, c: f64) -> f64 {
    let d = 3.0 * rho * rho - a;
    if d.abs() < 1e-8 {
        return rho;
    }
    let next = rho - branch_cubic(rho, a, s, c) / d;
    if branch_cubic(next, a, s, c).abs() <= branch_cubic(rho, a, s, c).abs() {
        next
    } else {
        rho
    }
}

/// Real roots of `rho^3 - rho (1 + c^2/(2 xi)) -+ c/4 = 0` via Cardano.
///
/// The second cube root is tied to the first through `S T = a / 3`, which
/// selects the admissible pairs `(omega_k, omega_k^2)` of cube roots of unity.
pub fn solve_branch_cubic(params: &ModelParams, parity: Parity) -> CubicRoots {
    let c = params.c;
    let s = parity.sign();
    let a = 1.0 + c * c / (2.0 * params.xi);
    let radicand = c * c / 64.0 - a.powi(3) / 27.0;
    let sqrt_rad = Complex64::new(radicand, 0.0).sqrt();
    let z_plus = Complex64::new(s * c / 8.0, 0.0) + sqrt_rad;
    let theta1 = principal_cbrt(z_plus);
    let theta2 = Complex64::new(a / 3.0, 0.0) / theta1;

    let omega = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-0.5, 3f64.sqrt() / 2.0),
        Complex64::new(-0.5, -(3f64.sqrt()) / 2.0),
    ];
    let scale = 1.0 + a.sqrt();
    let mut roots = Vec::with_capacity(3);
    for (k, w) in omega.iter().enumerate() {
        let rho = w * theta1 + w.conj() * theta2;
        if rho.im.abs() <= REALNESS_TOL * scale {
            let mut r = polish(rho.re, a, s, c);
            r = polish(r, a, s, c);
            roots.push((k + 1, r));
        }
    }
    CubicRoots { parity, roots, radicand, theta_terms: (theta1, theta2) }
}

/// Cube root through De Moivre's formula; real inputs take the real root.
fn principal_cbrt(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if z.im == 0.0 {
        return Complex64::new(z.re.cbrt(), 0.0);
    }
    let arg = z.arg() / 3.0;
    Complex64::from_polar(r.cbrt(), arg)
}

/// All homogeneous critical points with real `rho >= 0` and real `sigma`.
pub fn bulk_critical_points(params: &ModelParams) -> Vec<BulkCriticalPoint> {
    let mut out = vec![
        BulkCriticalPoint {
            rho: 0.0,
            sigma: 0.0,
            parity: None,
            energy: bulk_energy(0.0, 0.0, 0.0, 0.0, params),
            label: BranchLabel::TrivialZero,
        },
        BulkCriticalPoint {
            rho: 1.0,
            sigma: 0.0,
            parity: None,
            energy: bulk_energy(1.0, 0.0, 0.0, 0.0, params),
            label: BranchLabel::TrivialNematic,
        },
    ];
    for parity in [Parity::Even, Parity::Odd] {
        let cubic = solve_branch_cubic(params, parity);
        for &(k, rho) in &cubic.roots {
            if rho < -1e-12 {
                continue;
            }
            let rho = rho.max(0.0);
            let sigma_sq = 1.0 + parity.sign() * 2.0 * params.c * rho / params.xi;
            if sigma_sq < -SIGMA_RADICAND_TOL {
                continue;
            }
            let sigma = sigma_sq.max(0.0).sqrt();
            let phi = match parity {
                Parity::Even => 0.0,
                Parity::Odd => PI / 2.0,
            };
            out.push(BulkCriticalPoint {
                rho,
                sigma,
                parity: Some(parity),
                energy: bulk_energy(rho, sigma, 0.0, phi, params),
                label: BranchLabel::Coupled { parity, k },
            });
        }
    }
    out
}

/// Global minimiser among the enumerated critical points; ties go to larger `rho`.
pub fn bulk_minimiser(params: &ModelParams) -> BulkCriticalPoint {
    bulk_critical_points(params)
        .into_iter()
        .reduce(|best, p| {
            if p.energy < best.energy || (p.energy == best.energy && p.rho > best.rho) {
                p
            } else {
                best
            }
        })
        .expect("trivial branches are always present")
}

/// Largest real root of `rho^3 - rho (1 + c^2/2) - c/4`.
pub fn rho_star(c: f64) -> f64 {
    let params = ModelParams { l1: 1.0, l2: 1.0, c, xi: 1.0 };
    let cubic = solve_branch_cubic(&params, Parity::Even);
    let a = 1.0 + c * c / 2.0;
    // Extra polishing keeps the c = 0 value at exactly 1.
    let mut r = cubic.largest();
    for _ in 0..3 {
        r = polish(r, a, 1.0, c);
    }
    r
}

/// `(rho, sigma^2)` of the minimising branch from its small- or large-`c` expansion.
pub fn asymptotic_minimiser(c: f64, regime: Regime) -> (f64, f64) {
    match regime {
        Regime::Small => (1.0 + c / 8.0, 1.0 + 2.0 * c + c * c / 4.0),
        Regime::Large => ((2f64.sqrt() / 4.0).cbrt() * c, 1.0 + 2f64.sqrt() * c * c),
    }
}

/// Shift constants `alpha(c)`, `beta(c)` and the bound `rho_star` at unit `xi`.
pub fn bulk_minimum_info(c: f64) -> BulkMinimumInfo {
    let params = ModelParams { l1: 1.0, l2: 1.0, c, xi: 1.0 };
    let alpha = bulk_critical_points(&params)
        .iter()
        .map(|p| p.energy)
        .fold(f64::INFINITY, f64::min);
    let rs = rho_star(c);
    let m_bound_sq = 1.0 + 2.0 * c * rs;
    let beta = or_bulk_potential(rs, m_bound_sq.sqrt(), c);
    BulkMinimumInfo { alpha, beta, rho_star: rs, m_bound_sq }
}

/// Full bulk density shifted by `alpha(c)` so that its minimum is zero.
pub fn f_bar(q11: f64, q12: f64, m1: f64, m2: f64, c: f64, info: &BulkMinimumInfo) -> f64 {
    let params = ModelParams { l1: 1.0, l2: 1.0, c, xi: 1.0 };
    bulk_density(q11, q12, m1, m2, &params) - info.alpha
}
