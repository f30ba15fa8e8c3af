//! Piecewise-linear Galerkin discretisation of the full and OR energies.
//!
//! Unknowns are nodal values interleaved node by node, so degree of freedom
//! `node * nf + field` with `nf = 4` (`Q11, Q12, M1, M2`) for the full system
//! and `nf = 2` (`Q11, M1`) for the OR system. Gradient terms are integrated
//! exactly, bulk terms with two-point Gauss quadrature per cell. The residual
//! is the gradient of the discrete energy and the Jacobian its Hessian.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::params::ModelParams;

const GAUSS_LO: f64 = 0.211_324_865_405_187_1; // (1 - 1/sqrt 3) / 2
const GAUSS_HI: f64 = 0.788_675_134_594_812_9;

/// Norm below which a phase is reported as undefined.
pub const PHASE_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n_cells: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::MeshTooSmall(n_cells));
        }
        let n = n_cells as f64;
        let nodes = (0..=n_cells).map(|i| (2.0 * i as f64 - n) / n).collect();
        Ok(Self { n_cells, h: 2.0 / n, nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
}

pub fn make_mesh(n_cells: usize) -> Result<Mesh> {
    Mesh::new(n_cells)
}

/// Which energy is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Full,
    Or,
}

impl System {
    pub fn n_fields(self) -> usize {
        match self {
            System::Full => 4,
            System::Or => 2,
        }
    }

    /// Dirichlet data at `y = -1` (`left`) or `y = 1`.
    pub fn boundary_values(self, left: bool) -> &'static [f64] {
        match (self, left) {
            (System::Full, true) => &[1.0, 0.0, 1.0, 0.0],
            (System::Full, false) => &[-1.0, 0.0, -1.0, 0.0],
            (System::Or, true) => &[1.0, 1.0],
            (System::Or, false) => &[-1.0, -1.0],
        }
    }

    fn elastic(self, p: &ModelParams) -> [f64; 4] {
        match self {
            System::Full => [p.l1, p.l1, p.xi * p.l2, p.xi * p.l2],
            System::Or => [p.l1, p.xi * p.l2, 0.0, 0.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            System::Full => "full",
            System::Or => "or",
        }
    }
}

/// Nodal values of `(Q11, Q12, M1, M2)`.
///
/// Construction does not enforce the Dirichlet data; use [`FieldState::pinned`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub mesh: Mesh,
    pub q11: Vec<f64>,
    pub q12: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl FieldState {
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> [f64; 4]) -> Self {
        let vals: Vec<[f64; 4]> = mesh.nodes.iter().map(|&y| f(y)).collect();
        Self {
            mesh: mesh.clone(),
            q11: vals.iter().map(|v| v[0]).collect(),
            q12: vals.iter().map(|v| v[1]).collect(),
            m1: vals.iter().map(|v| v[2]).collect(),
            m2: vals.iter().map(|v| v[3]).collect(),
        }
    }

    pub fn from_dofs(mesh: &Mesh, x: &[f64]) -> Result<Self> {
        let n = mesh.n_nodes();
        if x.len() != 4 * n {
            return Err(Error::DimensionMismatch { expected: 4 * n, got: x.len() });
        }
        let field = |k: usize| (0..n).map(|i| x[4 * i + k]).collect();
        Ok(Self { mesh: mesh.clone(), q11: field(0), q12: field(1), m1: field(2), m2: field(3) })
    }

    pub fn to_dofs(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.q11.len());
        for i in 0..self.q11.len() {
            x.extend_from_slice(&[self.q11[i], self.q12[i], self.m1[i], self.m2[i]]);
        }
        x
    }

    pub fn pin(&mut self) {
        let n = self.mesh.n_cells;
        for (k, f) in [&mut self.q11, &mut self.q12, &mut self.m1, &mut self.m2].into_iter().enumerate() {
            f[0] = System::Full.boundary_values(true)[k];
            f[n] = System::Full.boundary_values(false)[k];
        }
    }

    pub fn pinned(mut self) -> Self {
        self.pin();
        self
    }

    pub fn is_pinned(&self) -> bool {
        let x = self.to_dofs();
        let n = self.mesh.n_cells;
        (0..4).all(|k| {
            x[k] == System::Full.boundary_values(true)[k]
                && x[4 * n + k] == System::Full.boundary_values(false)[k]
        })
    }

    /// `(Q11, Q12, M1, M2) -> (Q11, -Q12, M1, -M2)`.
    pub fn flip(&self) -> Self {
        let mut out = self.clone();
        out.q12.iter_mut().for_each(|v| *v = -*v);
        out.m2.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// `Q12 = M2 = 0` everywhere, so the state is an embedded OR state.
    pub fn is_or(&self, tol: f64) -> bool {
        self.q12.iter().chain(&self.m2).all(|v| v.abs() <= tol)
    }

    pub fn to_or(&self) -> OrState {
        OrState { mesh: self.mesh.clone(), q11: self.q11.clone(), m1: self.m1.clone() }
    }
}

/// Nodal values of `(Q11, M1)` with `Q12 = M2 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrState {
    pub mesh: Mesh,
    pub q11: Vec<f64>,
    pub m1: Vec<f64>,
}

impl OrState {
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> [f64; 2]) -> Self {
        let vals: Vec<[f64; 2]> = mesh.nodes.iter().map(|&y| f(y)).collect();
        Self {
            mesh: mesh.clone(),
            q11: vals.iter().map(|v| v[0]).collect(),
            m1: vals.iter().map(|v| v[1]).collect(),
        }
    }

    pub fn from_dofs(mesh: &Mesh, x: &[f64]) -> Result<Self> {
        let n = mesh.n_nodes();
        if x.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: x.len() });
        }
        Ok(Self {
            mesh: mesh.clone(),
            q11: (0..n).map(|i| x[2 * i]).collect(),
            m1: (0..n).map(|i| x[2 * i + 1]).collect(),
        })
    }

    pub fn to_dofs(&self) -> Vec<f64> {
        self.q11.iter().zip(&self.m1).flat_map(|(&q, &m)| [q, m]).collect()
    }

    pub fn pin(&mut self) {
        let n = self.mesh.n_cells;
        self.q11[0] = 1.0;
        self.m1[0] = 1.0;
        self.q11[n] = -1.0;
        self.m1[n] = -1.0;
    }

    pub fn pinned(mut self) -> Self {
        self.pin();
        self
    }

    pub fn embed(&self) -> FieldState {
        let z = vec![0.0; self.q11.len()];
        FieldState {
            mesh: self.mesh.clone(),
            q11: self.q11.clone(),
            q12: z.clone(),
            m1: self.m1.clone(),
            m2: z,
        }
    }
}

/// Bulk density with gradient and Hessian in `(Q11, Q12, M1, M2)`.
pub fn bulk_full(u: [f64; 4], c: f64, xi: f64) -> (f64, [f64; 4], [[f64; 4]; 4]) {
    let [q1, q2, m1, m2] = u;
    let qq = q1 * q1 + q2 * q2 - 1.0;
    let mm = m1 * m1 + m2 * m2 - 1.0;
    let f = qq * qq + 0.25 * xi * mm * mm - c * q1 * (m1 * m1 - m2 * m2) - 2.0 * c * q2 * m1 * m2;
    let g = [
        4.0 * q1 * qq - c * (m1 * m1 - m2 * m2),
        4.0 * q2 * qq - 2.0 * c * m1 * m2,
        xi * m1 * mm - 2.0 * c * q1 * m1 - 2.0 * c * q2 * m2,
        xi * m2 * mm + 2.0 * c * q1 * m2 - 2.0 * c * q2 * m1,
    ];
    let h01 = 8.0 * q1 * q2;
    let h23 = 2.0 * xi * m1 * m2 - 2.0 * c * q2;
    let h = [
        [4.0 * qq + 8.0 * q1 * q1, h01, -2.0 * c * m1, 2.0 * c * m2],
        [h01, 4.0 * qq + 8.0 * q2 * q2, -2.0 * c * m2, -2.0 * c * m1],
        [-2.0 * c * m1, -2.0 * c * m2, xi * mm + 2.0 * xi * m1 * m1 - 2.0 * c * q1, h23],
        [2.0 * c * m2, -2.0 * c * m1, h23, xi * mm + 2.0 * xi * m2 * m2 + 2.0 * c * q1],
    ];
    (f, g, h)
}

/// A discretised energy: mesh, constants and field layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mesh: Mesh,
    pub params: ModelParams,
    pub system: System,
}

impl Problem {
    pub fn new(mesh: Mesh, params: ModelParams, system: System) -> Self {
        Self { mesh, params, system }
    }

    pub fn nf(&self) -> usize {
        self.system.n_fields()
    }

    pub fn n_dofs(&self) -> usize {
        self.nf() * self.mesh.n_nodes()
    }

    /// Half-bandwidth of the Hessian under node-major interleaving.
    pub fn bandwidth(&self) -> usize {
        2 * self.nf() - 1
    }

    /// Contiguous range of the unpinned unknowns.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.nf()..self.nf() * self.mesh.n_cells
    }

    pub fn is_pinned_dof(&self, dof: usize) -> bool {
        !self.interior().contains(&dof)
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self { params, ..self.clone() }
    }

    /// Overwrites the boundary unknowns with the Dirichlet data.
    pub fn pin(&self, x: &mut [f64]) {
        let nf = self.nf();
        let last = nf * self.mesh.n_cells;
        x[..nf].copy_from_slice(self.system.boundary_values(true));
        x[last..last + nf].copy_from_slice(self.system.boundary_values(false));
    }

    /// Bulk density and derivatives in this system's own variables.
    fn bulk(&self, u: &[f64]) -> (f64, [f64; 4], [[f64; 4]; 4]) {
        let (c, xi) = (self.params.c, self.params.xi);
        match self.system {
            System::Full => bulk_full([u[0], u[1], u[2], u[3]], c, xi),
            System::Or => {
                let (f, g, h) = bulk_full([u[0], 0.0, u[1], 0.0], c, xi);
                let mut gg = [0.0; 4];
                let mut hh = [[0.0; 4]; 4];
                let idx = [0, 2];
                for a in 0..2 {
                    gg[a] = g[idx[a]];
                    for b in 0..2 {
                        hh[a][b] = h[idx[a]][idx[b]];
                    }
                }
                (f, gg, hh)
            }
        }
    }

    /// Field values at the two Gauss points of `cell`.
    fn gauss_values(&self, x: &[f64], cell: usize) -> [[f64; 4]; 2] {
        let nf = self.nf();
        let (a, b) = (cell * nf, (cell + 1) * nf);
        let mut out = [[0.0; 4]; 2];
        for k in 0..nf {
            out[0][k] = GAUSS_HI * x[a + k] + GAUSS_LO * x[b + k];
            out[1][k] = GAUSS_LO * x[a + k] + GAUSS_HI * x[b + k];
        }
        out
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(x.len(), self.n_dofs(), "state length does not match problem");
    }

    /// Gradient (elastic) part of the discrete energy.
    pub fn elastic_energy(&self, x: &[f64]) -> f64 {
        self.check_len(x);
        let nf = self.nf();
        let k = self.system.elastic(&self.params);
        let h = self.mesh.h;
        let mut e = 0.0;
        for cell in 0..self.mesh.n_cells {
            for f in 0..nf {
                let d = x[(cell + 1) * nf + f] - x[cell * nf + f];
                e += 0.5 * k[f] * d * d / h;
            }
        }
        e
    }

    /// Bulk part of the discrete energy.
    pub fn bulk_energy(&self, x: &[f64]) -> f64 {
        self.check_len(x);
        let half_h = 0.5 * self.mesh.h;
        (0..self.mesh.n_cells)
            .map(|cell| {
                let g = self.gauss_values(x, cell);
                half_h * (self.bulk(&g[0]).0 + self.bulk(&g[1]).0)
            })
            .sum()
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.elastic_energy(x) + self.bulk_energy(x)
    }

    /// Gradient of the discrete energy, zero on pinned unknowns.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x);
        let nf = self.nf();
        let k = self.system.elastic(&self.params);
        let h = self.mesh.h;
        let mut r = vec![0.0; x.len()];
        for cell in 0..self.mesh.n_cells {
            let (a, b) = (cell * nf, (cell + 1) * nf);
            for f in 0..nf {
                let d = k[f] * (x[b + f] - x[a + f]) / h;
                r[a + f] -= d;
                r[b + f] += d;
            }
            let gv = self.gauss_values(x, cell);
            for (q, (na, nb)) in [(GAUSS_HI, GAUSS_LO), (GAUSS_LO, GAUSS_HI)].into_iter().enumerate() {
                let g = self.bulk(&gv[q]).1;
                for f in 0..nf {
                    r[a + f] += 0.5 * h * na * g[f];
                    r[b + f] += 0.5 * h * nb * g[f];
                }
            }
        }
        let last = nf * self.mesh.n_cells;
        r[..nf].iter_mut().for_each(|v| *v = 0.0);
        r[last..].iter_mut().for_each(|v| *v = 0.0);
        r
    }

    /// Hessian of the discrete energy with identity rows and columns at pinned unknowns.
    pub fn jacobian(&self, x: &[f64]) -> BandMatrix {
        let mut j = self.hessian_raw(x);
        for d in 0..x.len() {
            if self.is_pinned_dof(d) {
                j.pin(d);
            }
        }
        j
    }

    /// Hessian restricted to the interior unknowns.
    pub fn interior_hessian(&self, x: &[f64]) -> BandMatrix {
        let r = self.interior();
        self.hessian_raw(x).principal_submatrix(r.start, r.end)
    }

    fn hessian_raw(&self, x: &[f64]) -> BandMatrix {
        self.check_len(x);
        let nf = self.nf();
        let kd = self.bandwidth();
        let k = self.system.elastic(&self.params);
        let h = self.mesh.h;
        let mut j = BandMatrix::zeros(x.len(), kd, kd);
        for cell in 0..self.mesh.n_cells {
            let (a, b) = (cell * nf, (cell + 1) * nf);
            for f in 0..nf {
                let s = k[f] / h;
                j.add(a + f, a + f, s);
                j.add(b + f, b + f, s);
                j.add(a + f, b + f, -s);
                j.add(b + f, a + f, -s);
            }
            let gv = self.gauss_values(x, cell);
            for (q, w) in [[GAUSS_HI, GAUSS_LO], [GAUSS_LO, GAUSS_HI]].into_iter().enumerate() {
                let hb = self.bulk(&gv[q]).2;
                let base = [a, b];
                for p in 0..2 {
                    for r in 0..2 {
                        let s = 0.5 * h * w[p] * w[r];
                        for f in 0..nf {
                            for g in 0..nf {
                                j.add(base[p] + f, base[r] + g, s * hb[f][g]);
                            }
                        }
                    }
                }
            }
        }
        j
    }

    /// Discrete `L2` distance over interior unknowns: `sqrt(h * sum e_i^2)`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = self.interior();
        let s: f64 = x[r.clone()].iter().zip(&y[r]).map(|(a, b)| (a - b) * (a - b)).sum();
        (self.mesh.h * s).sqrt()
    }

    /// Flip `(Q12, M2) -> (-Q12, -M2)`; identity for OR states.
    pub fn flip(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        if self.system == System::Full {
            for i in 0..self.mesh.n_nodes() {
                out[4 * i + 1] = -out[4 * i + 1];
                out[4 * i + 3] = -out[4 * i + 3];
            }
        }
        out
    }

    /// Interprets a dof vector as a full-system state (OR states are embedded).
    pub fn field_state(&self, x: &[f64]) -> FieldState {
        match self.system {
            System::Full => FieldState::from_dofs(&self.mesh, x).expect("length checked by caller"),
            System::Or => OrState::from_dofs(&self.mesh, x).expect("length checked by caller").embed(),
        }
    }

    /// Dof vector of a full state in this system's layout (OR drops `Q12`, `M2`).
    pub fn dofs_of(&self, s: &FieldState) -> Vec<f64> {
        match self.system {
            System::Full => s.to_dofs(),
            System::Or => s.to_or().to_dofs(),
        }
    }

    /// Dof vector from a profile `y -> (Q11, Q12, M1, M2)`, pinned.
    pub fn sample(&self, f: impl Fn(f64) -> [f64; 4]) -> Vec<f64> {
        let mut x = self.dofs_of(&FieldState::from_fn(&self.mesh, f));
        self.pin(&mut x);
        x
    }
}

pub fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Discrete full energy of `state`.
pub fn energy(state: &FieldState, params: &ModelParams) -> f64 {
    Problem::new(state.mesh.clone(), *params, System::Full).energy(&state.to_dofs())
}

/// Discrete OR energy of `state`.
pub fn or_energy(state: &OrState, params: &ModelParams) -> f64 {
    Problem::new(state.mesh.clone(), *params, System::Or).energy(&state.to_dofs())
}

/// Full-system residual in interleaved layout.
pub fn residual(state: &FieldState, params: &ModelParams) -> Vec<f64> {
    Problem::new(state.mesh.clone(), *params, System::Full).residual(&state.to_dofs())
}

/// Full-system Jacobian in interleaved layout.
pub fn jacobian(state: &FieldState, params: &ModelParams) -> BandMatrix {
    Problem::new(state.mesh.clone(), *params, System::Full).jacobian(&state.to_dofs())
}

/// `Q12` integrated over the domain (exact for piecewise-linear fields).
pub fn integral_q12(state: &FieldState) -> f64 {
    let h = state.mesh.h;
    state.q12.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub q_norm: Vec<f64>,
    pub m_norm: Vec<f64>,
    /// Unwrapped phase of `(Q11, Q12)`, i.e. twice the director angle.
    pub theta: Vec<f64>,
    /// Unwrapped phase of `(M1, M2)`.
    pub phi: Vec<f64>,
    pub twophi_minus_theta: Vec<f64>,
    /// Director angle `theta / 2`.
    pub director_angle: Vec<f64>,
    /// Unit magnetisation, `None` where `|M|` vanishes.
    pub m_unit: Vec<Option<[f64; 2]>>,
}

/// Continuous lift of `atan2(b, a)` starting from the first node.
fn unwrapped_phase(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut prev: Option<f64> = None;
    for (&x, &y) in a.iter().zip(b) {
        if x.hypot(y) < PHASE_NORM_TOL {
            out.push(f64::NAN);
            continue;
        }
        let mut p = y.atan2(x);
        if let Some(q) = prev {
            let two_pi = 2.0 * std::f64::consts::PI;
            while p - q > std::f64::consts::PI {
                p -= two_pi;
            }
            while q - p > std::f64::consts::PI {
                p += two_pi;
            }
        }
        prev = Some(p);
        out.push(p);
    }
    out
}

pub fn diagnostics(state: &FieldState) -> Diagnostics {
    let q_norm: Vec<f64> = state.q11.iter().zip(&state.q12).map(|(a, b)| a.hypot(*b)).collect();
    let m_norm: Vec<f64> = state.m1.iter().zip(&state.m2).map(|(a, b)| a.hypot(*b)).collect();
    let theta = unwrapped_phase(&state.q11, &state.q12);
    let phi = unwrapped_phase(&state.m1, &state.m2);
    let twophi_minus_theta = phi.iter().zip(&theta).map(|(p, t)| 2.0 * p - t).collect();
    let director_angle = theta.iter().map(|t| 0.5 * t).collect();
    let m_unit = state
        .m1
        .iter()
        .zip(&state.m2)
        .zip(&m_norm)
        .map(|((a, b), n)| (*n >= PHASE_NORM_TOL).then(|| [a / n, b / n]))
        .collect();
    Diagnostics { q_norm, m_norm, theta, phi, twophi_minus_theta, director_angle, m_unit }
}
