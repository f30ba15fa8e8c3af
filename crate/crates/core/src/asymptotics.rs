//! Limiting profiles: the large-`l` Laplace limit, the small-`c` OR expansion
//! with `l = 1/c`, and the rotating limit maps as `l -> 0`.

use std::f64::consts::PI;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bulk::rho_star;
use crate::discretization::{FieldState, Mesh, Problem, System};
use crate::error::{Error, Result};
use crate::newton::{newton_solve, SolveOptions};
use crate::params::ModelParams;

pub type Rational = Ratio<i64>;

/// Polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPoly(pub Vec<Rational>);

impl RationalPoly {
    /// From `(numerator, denominator, degree)` terms.
    pub fn from_terms(terms: &[(i64, i64, usize)]) -> Self {
        let deg = terms.iter().map(|t| t.2).max().unwrap_or(0);
        let mut c = vec![Rational::from_integer(0); deg + 1];
        for &(n, d, k) in terms {
            c[k] += Rational::new(n, d);
        }
        Self(c)
    }

    pub fn eval_exact(&self, y: Rational) -> Rational {
        self.0.iter().rev().fold(Rational::from_integer(0), |acc, &a| acc * y + a)
    }

    /// Horner evaluation in floating point.
    pub fn eval(&self, y: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, a| acc * y + (*a.numer() as f64 / *a.denom() as f64))
    }

    pub fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Self(vec![Rational::from_integer(0)]);
        }
        Self(self.0.iter().enumerate().skip(1).map(|(k, a)| a * Rational::from_integer(k as i64)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut c = vec![Rational::from_integer(0); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self(c).trimmed()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let z = Rational::from_integer(0);
        Self((0..n).map(|k| *self.0.get(k).unwrap_or(&z) + *other.0.get(k).unwrap_or(&z)).collect()).trimmed()
    }

    pub fn scale(&self, s: Rational) -> Self {
        Self(self.0.iter().map(|a| a * s).collect()).trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.0.len() > 1 && *self.0.last().unwrap() == Rational::from_integer(0) {
            self.0.pop();
        }
        self
    }
}

/// First-order correction of `Q11`: `-y^5/5 + 2y^3/3 - 7y/15`.
pub fn f2() -> RationalPoly {
    RationalPoly::from_terms(&[(-1, 5, 5), (2, 3, 3), (-7, 15, 1)])
}

/// First-order correction of `M1`: `-y^5/20 + y^3/6 - 7y/60`.
pub fn f2_star() -> RationalPoly {
    RationalPoly::from_terms(&[(-1, 20, 5), (1, 6, 3), (-7, 60, 1)])
}

/// Second-order correction of `Q11`.
pub fn p_poly() -> RationalPoly {
    RationalPoly::from_terms(&[
        (-1, 30, 9),
        (22, 105, 7),
        (-31, 75, 5),
        (-1, 12, 4),
        (14, 45, 3),
        (-233, 3150, 1),
        (1, 12, 0),
    ])
}

/// Second-order correction of `M1`.
pub fn q_poly() -> RationalPoly {
    RationalPoly::from_terms(&[
        (-1, 480, 9),
        (11, 840, 7),
        (-31, 1200, 5),
        (-1, 6, 4),
        (7, 360, 3),
        (-233, 50400, 1),
        (1, 6, 0),
    ])
}

/// Truncation order of the OR expansion in powers of `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpansionOrder {
    Zero,
    One,
    Two,
}

impl ExpansionOrder {
    pub fn as_usize(self) -> usize {
        match self {
            ExpansionOrder::Zero => 0,
            ExpansionOrder::One => 1,
            ExpansionOrder::Two => 2,
        }
    }

    pub fn from_usize(k: usize) -> Option<Self> {
        match k {
            0 => Some(Self::Zero),
            1 => Some(Self::One),
            2 => Some(Self::Two),
            _ => None,
        }
    }
}

/// Truncated OR expansion `(Q11, M1)` at `y` for `l = 1/c`.
pub fn or_expansion(y: f64, c: f64, order: ExpansionOrder) -> (f64, f64) {
    let mut q = -y;
    let mut m = -y;
    if order.as_usize() >= 1 {
        q += c * f2().eval(y);
        m += c * f2_star().eval(y);
    }
    if order.as_usize() >= 2 {
        q += c * c * p_poly().eval(y);
        m += c * c * q_poly().eval(y);
    }
    (q, m)
}

/// Sup norm of the OR equations, multiplied through by `c`, at the order-2
/// expansion: `Q'' - c (4Q(Q^2-1) - c M^2)` and `M'' - c (M(M^2-1) - 2cQM)`.
pub fn expansion_equation_residual(c: f64, samples: usize) -> f64 {
    let (f2d, fsd) = (f2().derivative().derivative(), f2_star().derivative().derivative());
    let (pd, qd) = (p_poly().derivative().derivative(), q_poly().derivative().derivative());
    (0..=samples)
        .map(|i| {
            let y = -1.0 + 2.0 * i as f64 / samples as f64;
            let (qv, mv) = or_expansion(y, c, ExpansionOrder::Two);
            let qpp = c * f2d.eval(y) + c * c * pd.eval(y);
            let mpp = c * fsd.eval(y) + c * c * qd.eval(y);
            let rq = qpp - c * (4.0 * qv * (qv * qv - 1.0) - c * mv * mv);
            let rm = mpp - c * (mv * (mv * mv - 1.0) - 2.0 * c * qv * mv);
            rq.abs().max(rm.abs())
        })
        .fold(0.0, f64::max)
}

/// Nodal interpolant of `(-y, 0, -y, 0)`.
pub fn laplace_limit_state(mesh: &Mesh) -> FieldState {
    FieldState::from_fn(mesh, |y| [-y, 0.0, -y, 0.0])
}

/// Sense of rotation of the limit map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Plus,
    Minus,
}

impl Sense {
    pub fn sign(self) -> f64 {
        match self {
            Sense::Plus => 1.0,
            Sense::Minus => -1.0,
        }
    }
}

/// Rotating limit profile with `phi0 = +-pi (y+1)/2`, `|Q| = rho*` and
/// `|M|^2 = 1 + 2 c rho*`. It does not satisfy the Dirichlet data at `y = 1`
/// in `Q12`, `M2` exactly up to round-off and is returned unpinned.
pub fn limit_map_l0(mesh: &Mesh, c: f64, sense: Sense) -> FieldState {
    let rs = rho_star(c);
    let ms = (1.0 + 2.0 * c * rs).sqrt();
    FieldState::from_fn(mesh, |y| {
        let phi = sense.sign() * PI * (y + 1.0) / 2.0;
        [rs * (2.0 * phi).cos(), rs * (2.0 * phi).sin(), ms * phi.cos(), ms * phi.sin()]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub order: usize,
    pub c: Vec<f64>,
    pub gap_q11: Vec<f64>,
    pub gap_m1: Vec<f64>,
    pub slope_q11: f64,
    pub slope_m1: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// OR solution at `l = 1/c` started from the order-0 expansion.
pub fn or_solution_at(c: f64, n_cells: usize) -> Result<Vec<f64>> {
    let params = ModelParams::symmetric(1.0 / c, c)?;
    let problem = Problem::new(Mesh::new(n_cells)?, params, System::Or);
    let guess = problem.sample(|y| {
        let (q, m) = or_expansion(y, c, ExpansionOrder::Zero);
        [q, 0.0, m, 0.0]
    });
    let opts = SolveOptions { abs_tol: 1e-12, ..Default::default() };
    let rep = newton_solve(&problem, &guess, &opts);
    if !rep.converged {
        return Err(Error::NotConverged(rep.final_residual()));
    }
    Ok(rep.final_state)
}

/// Sup-norm gaps between computed OR solutions at `l = 1/c` and the truncated
/// expansion, with fitted log-log slopes.
pub fn convergence_study(c_grid: &[f64], order: ExpansionOrder, n_cells: usize) -> Result<ConvergenceStudy> {
    if c_grid.iter().any(|&c| !(c > 0.0 && c <= 0.5)) {
        return Err(Error::InvalidParameter("c grid must lie in (0, 0.5]".into()));
    }
    let mesh = Mesh::new(n_cells)?;
    let gaps: Vec<(f64, f64)> = c_grid
        .par_iter()
        .map(|&c| {
            let x = or_solution_at(c, n_cells)?;
            let mut gq = 0.0_f64;
            let mut gm = 0.0_f64;
            for (i, &y) in mesh.nodes.iter().enumerate() {
                let (q, m) = or_expansion(y, c, order);
                gq = gq.max((x[2 * i] - q).abs());
                gm = gm.max((x[2 * i + 1] - m).abs());
            }
            Ok((gq, gm))
        })
        .collect::<Result<_>>()?;
    let gap_q11: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let gap_m1: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    Ok(ConvergenceStudy {
        order: order.as_usize(),
        c: c_grid.to_vec(),
        slope_q11: loglog_slope(c_grid, &gap_q11),
        slope_m1: loglog_slope(c_grid, &gap_m1),
        gap_q11,
        gap_m1,
    })
}
