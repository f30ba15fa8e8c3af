//! Transition costs in the degenerate metric `sqrt(f~) |dp|` on the OR plane
//! `p = (Q11, M1)`, and the sharp-interface partition functional built on them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bulk::{bulk_minimum_info, or_bulk_potential};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub q11: f64,
    pub m1: f64,
}

impl PlanePoint {
    pub const fn new(q11: f64, m1: f64) -> Self {
        Self { q11, m1 }
    }

    fn dist(self, o: PlanePoint) -> f64 {
        (self.q11 - o.q11).hypot(self.m1 - o.m1)
    }

    fn lerp(self, o: PlanePoint, t: f64) -> PlanePoint {
        PlanePoint::new(self.q11 + t * (o.q11 - self.q11), self.m1 + t * (o.m1 - self.m1))
    }
}

/// Bulk minima `p*`, `p**` and boundary states `p_b(-1)`, `p_b(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub p_star: PlanePoint,
    pub p_star2: PlanePoint,
    pub b_minus: PlanePoint,
    pub b_plus: PlanePoint,
}

pub fn landmarks(c: f64) -> Landmarks {
    let info = bulk_minimum_info(c);
    let ms = info.m_bound_sq.sqrt();
    Landmarks {
        p_star: PlanePoint::new(info.rho_star, ms),
        p_star2: PlanePoint::new(info.rho_star, -ms),
        b_minus: PlanePoint::new(1.0, 1.0),
        b_plus: PlanePoint::new(-1.0, -1.0),
    }
}

/// Shifted OR bulk potential `f~ = f_OR - beta(c)` with a fixed `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedPotential {
    pub c: f64,
    pub beta: f64,
}

impl ShiftedPotential {
    pub fn new(c: f64) -> Self {
        Self { c, beta: bulk_minimum_info(c).beta }
    }

    /// `f~`, clamped at zero for round-off below `1e-12`.
    pub fn value(&self, p: PlanePoint) -> Result<f64> {
        let v = or_bulk_potential(p.q11, p.m1, self.c) - self.beta;
        if v < -1e-9 {
            return Err(Error::NegativePotential(v));
        }
        Ok(v.max(0.0))
    }

    fn sqrt_value(&self, p: PlanePoint) -> f64 {
        (or_bulk_potential(p.q11, p.m1, self.c) - self.beta).max(0.0).sqrt()
    }
}

pub fn f_tilde(point: PlanePoint, c: f64) -> Result<f64> {
    ShiftedPotential::new(c).value(point)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanePath {
    pub nodes: Vec<PlanePoint>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCost {
    pub cost: f64,
    pub grid_cost: f64,
    pub path: PlanePath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Grid nodes per side.
    pub grid: usize,
    pub padding: f64,
    /// Polyline sizes visited by the refinement stage.
    pub refine_start: usize,
    pub refine_max: usize,
    pub refine_tol: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { grid: 400, padding: 0.5, refine_start: 32, refine_max: 512, refine_tol: 1e-8 }
    }
}

// Five-point Gauss-Legendre on [0, 1].
const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

fn segment_cost(pot: &ShiftedPotential, a: PlanePoint, b: PlanePoint) -> f64 {
    let len = a.dist(b);
    if len == 0.0 {
        return 0.0;
    }
    len * GL5.iter().map(|&(t, w)| w * pot.sqrt_value(a.lerp(b, t))).sum::<f64>()
}

fn polyline_cost(pot: &ShiftedPotential, nodes: &[PlanePoint]) -> f64 {
    nodes.windows(2).map(|w| segment_cost(pot, w[0], w[1])).sum()
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Grid {
    n: usize,
    lo: PlanePoint,
    dx: f64,
    dy: f64,
    sq: Vec<f64>,
}

impl Grid {
    fn point(&self, k: usize) -> PlanePoint {
        let (i, j) = (k % self.n, k / self.n);
        PlanePoint::new(self.lo.q11 + i as f64 * self.dx, self.lo.m1 + j as f64 * self.dy)
    }

    /// Corners of the cell containing `p`.
    fn corners(&self, p: PlanePoint) -> [usize; 4] {
        let fi = ((p.q11 - self.lo.q11) / self.dx).floor().clamp(0.0, (self.n - 2) as f64) as usize;
        let fj = ((p.m1 - self.lo.m1) / self.dy).floor().clamp(0.0, (self.n - 2) as f64) as usize;
        let k = fj * self.n + fi;
        [k, k + 1, k + self.n, k + self.n + 1]
    }
}

/// Grid Dijkstra stage; returns cost and node path from `p0` to `p1`.
fn grid_path(pot: &ShiftedPotential, p0: PlanePoint, p1: PlanePoint, opts: &MetricOptions) -> (f64, Vec<PlanePoint>) {
    let lm = landmarks(pot.c);
    let pts = [p0, p1, lm.p_star, lm.p_star2];
    let lo_q = pts.iter().map(|p| p.q11).fold(f64::INFINITY, f64::min) - opts.padding;
    let hi_q = pts.iter().map(|p| p.q11).fold(f64::NEG_INFINITY, f64::max) + opts.padding;
    let lo_m = pts.iter().map(|p| p.m1).fold(f64::INFINITY, f64::min) - opts.padding;
    let hi_m = pts.iter().map(|p| p.m1).fold(f64::NEG_INFINITY, f64::max) + opts.padding;
    let n = opts.grid.max(3);
    let mut grid = Grid {
        n,
        lo: PlanePoint::new(lo_q, lo_m),
        dx: (hi_q - lo_q) / (n - 1) as f64,
        dy: (hi_m - lo_m) / (n - 1) as f64,
        sq: Vec::new(),
    };
    grid.sq = (0..n * n).map(|k| pot.sqrt_value(grid.point(k))).collect();

    // Virtual source and target follow the grid nodes.
    let (src, dst) = (n * n, n * n + 1);
    let s0 = pot.sqrt_value(p0);
    let s1 = pot.sqrt_value(p1);
    let src_edges: Vec<(usize, f64)> = grid
        .corners(p0)
        .iter()
        .map(|&k| (k, 0.5 * (s0 + grid.sq[k]) * p0.dist(grid.point(k))))
        .collect();
    let dst_corners = grid.corners(p1);
    let mut dist = vec![f64::INFINITY; n * n + 2];
    let mut prev = vec![usize::MAX; n * n + 2];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem(0.0, src));
    let steps: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == dst {
            break;
        }
        let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<HeapItem>| {
            if d + w < dist[v] {
                dist[v] = d + w;
                prev[v] = u;
                heap.push(HeapItem(d + w, v));
            }
        };
        if u == src {
            for &(k, w) in &src_edges {
                relax(k, w, &mut heap);
            }
            continue;
        }
        let (i, j) = ((u % n) as i64, (u / n) as i64);
        let pu = grid.point(u);
        for (di, dj) in steps {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                continue;
            }
            let v = b as usize * n + a as usize;
            let len = ((di as f64) * grid.dx).hypot((dj as f64) * grid.dy);
            relax(v, 0.5 * (grid.sq[u] + grid.sq[v]) * len, &mut heap);
        }
        if dst_corners.contains(&u) {
            relax(dst, 0.5 * (grid.sq[u] + s1) * pu.dist(p1), &mut heap);
        }
    }
    let mut path = vec![p1];
    let mut k = prev[dst];
    while k != src && k != usize::MAX {
        path.push(grid.point(k));
        k = prev[k];
    }
    path.push(p0);
    path.reverse();
    (dist[dst], path)
}

/// Resamples a polyline to `m` nodes equally spaced in arclength.
fn resample(nodes: &[PlanePoint], m: usize) -> Vec<PlanePoint> {
    let mut cum = vec![0.0];
    for w in nodes.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![nodes[0]; m];
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let s = total * k as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(nodes[seg].lerp(nodes[seg + 1], t));
    }
    out[0] = nodes[0];
    out[m - 1] = *nodes.last().unwrap();
    out
}

/// Gauss-Seidel pattern search on interior nodes along the local normal.
fn relax_polyline(pot: &ShiftedPotential, nodes: &mut [PlanePoint], tol: f64) {
    let m = nodes.len();
    if m < 3 {
        return;
    }
    let mut step = nodes[0].dist(nodes[m - 1]).max(1e-3) / (m as f64);
    let mut cost = polyline_cost(pot, nodes);
    for _ in 0..200 {
        for k in 1..m - 1 {
            let (a, b) = (nodes[k - 1], nodes[k + 1]);
            let tq = b.q11 - a.q11;
            let tm = b.m1 - a.m1;
            let tl = tq.hypot(tm);
            let dirs = if tl > 0.0 {
                [(-tm / tl, tq / tl), (tm / tl, -tq / tl), (tq / tl, tm / tl), (-tq / tl, -tm / tl)]
            } else {
                [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
            };
            let local = |p: PlanePoint| segment_cost(pot, a, p) + segment_cost(pot, p, b);
            let mut best = local(nodes[k]);
            for (dq, dm) in dirs {
                let trial = PlanePoint::new(nodes[k].q11 + step * dq, nodes[k].m1 + step * dm);
                let c = local(trial);
                if c < best {
                    best = c;
                    nodes[k] = trial;
                }
            }
        }
        let new_cost = polyline_cost(pot, nodes);
        if cost - new_cost < tol {
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
        cost = new_cost;
    }
}

/// Degenerate-metric distance between `p0` and `p1`.
pub fn transition_cost(p0: PlanePoint, p1: PlanePoint, c: f64) -> TransitionCost {
    transition_cost_with(p0, p1, c, &MetricOptions::default())
}

pub fn transition_cost_with(p0: PlanePoint, p1: PlanePoint, c: f64, opts: &MetricOptions) -> TransitionCost {
    if p0 == p1 {
        return TransitionCost { cost: 0.0, grid_cost: 0.0, path: PlanePath { nodes: vec![p0], cost: 0.0 } };
    }
    // Solve in a canonical direction so the cost is exactly symmetric.
    if (p1.q11, p1.m1) < (p0.q11, p0.m1) {
        let mut t = transition_cost_with(p1, p0, c, opts);
        t.path.nodes.reverse();
        return t;
    }
    let pot = ShiftedPotential::new(c);
    let (grid_cost, grid_nodes) = grid_path(&pot, p0, p1, opts);
    let mut m = opts.refine_start.max(3);
    let mut nodes = resample(&grid_nodes, m);
    let mut prev_cost = f64::INFINITY;
    loop {
        relax_polyline(&pot, &mut nodes, opts.refine_tol);
        let cost = polyline_cost(&pot, &nodes);
        if m >= opts.refine_max || (prev_cost - cost).abs() < opts.refine_tol {
            break;
        }
        prev_cost = cost;
        m = 2 * m - 1;
        nodes = resample(&nodes, m);
    }
    let refined = polyline_cost(&pot, &nodes);
    let (cost, nodes) = if refined <= grid_cost { (refined, nodes) } else { (grid_cost, grid_nodes) };
    TransitionCost { cost, grid_cost, path: PlanePath { nodes, cost } }
}

/// Named pair of landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    StarStar2,
    StarBPlus,
    Star2BMinus,
    StarBMinus,
    Star2BPlus,
}

impl Pair {
    pub const ALL: [Pair; 5] = [Pair::StarStar2, Pair::StarBPlus, Pair::Star2BMinus, Pair::StarBMinus, Pair::Star2BPlus];

    pub fn label(self) -> &'static str {
        match self {
            Pair::StarStar2 => "p*->p**",
            Pair::StarBPlus => "p*->pb(1)",
            Pair::Star2BMinus => "p**->pb(-1)",
            Pair::StarBMinus => "p*->pb(-1)",
            Pair::Star2BPlus => "p**->pb(1)",
        }
    }

    pub fn endpoints(self, lm: &Landmarks) -> (PlanePoint, PlanePoint) {
        match self {
            Pair::StarStar2 => (lm.p_star, lm.p_star2),
            Pair::StarBPlus => (lm.p_star, lm.b_plus),
            Pair::Star2BMinus => (lm.p_star2, lm.b_minus),
            Pair::StarBMinus => (lm.p_star, lm.b_minus),
            Pair::Star2BPlus => (lm.p_star2, lm.b_plus),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub c: f64,
    pub costs: Vec<(Pair, f64)>,
}

impl CostTable {
    pub fn get(&self, pair: Pair) -> f64 {
        self.costs.iter().find(|(p, _)| *p == pair).map(|x| x.1).expect("all pairs computed")
    }
}

/// All five landmark transition costs, computed in parallel.
pub fn cost_table(c: f64, opts: &MetricOptions) -> CostTable {
    let lm = landmarks(c);
    let costs = Pair::ALL
        .par_iter()
        .map(|&pair| {
            let (a, b) = pair.endpoints(&lm);
            (pair, transition_cost_with(a, b, c, opts).cost)
        })
        .collect();
    CostTable { c, costs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    PStar,
    PStar2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStructure {
    /// Phases of the consecutive intervals from `y = -1` to `y = 1`.
    pub phases: Vec<Phase>,
    pub jumps: usize,
    pub j: f64,
}

/// `J = N d(p*, p**) + d(first, p_b(-1)) + d(last, p_b(1))`.
pub fn limit_functional(table: &CostTable, first: Phase, jumps: usize) -> LimitStructure {
    let other = |p: Phase| if p == Phase::PStar { Phase::PStar2 } else { Phase::PStar };
    let mut phases = vec![first];
    for _ in 0..jumps {
        phases.push(other(*phases.last().unwrap()));
    }
    let last = *phases.last().unwrap();
    let left = match first {
        Phase::PStar => table.get(Pair::StarBMinus),
        Phase::PStar2 => table.get(Pair::Star2BMinus),
    };
    let right = match last {
        Phase::PStar => table.get(Pair::StarBPlus),
        Phase::PStar2 => table.get(Pair::Star2BPlus),
    };
    LimitStructure { j: jumps as f64 * table.get(Pair::StarStar2) + left + right, phases, jumps }
}

/// Minimiser of `J` over up to two interior jumps and both initial phases.
pub fn minimise_limit_functional_with(table: &CostTable) -> LimitStructure {
    let mut best: Option<LimitStructure> = None;
    for jumps in 0..=2 {
        for first in [Phase::PStar, Phase::PStar2] {
            let s = limit_functional(table, first, jumps);
            if best.as_ref().is_none_or(|b| s.j < b.j) {
                best = Some(s);
            }
        }
    }
    best.expect("candidates enumerated")
}

pub fn minimise_limit_functional(c: f64) -> LimitStructure {
    minimise_limit_functional_with(&cost_table(c, &MetricOptions::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coarse() -> MetricOptions {
        MetricOptions { grid: 120, refine_max: 128, ..Default::default() }
    }

    #[test]
    fn potential_vanishes_at_minima() {
        for c in [0.5, 1.0, 5.0] {
            let lm = landmarks(c);
            assert!(f_tilde(lm.p_star, c).unwrap() <= 1e-12);
            assert!(f_tilde(lm.p_star2, c).unwrap() <= 1e-12);
        }
        // 0 + 0 - 1 - beta(1) with beta(1) near -2.514.
        let v = f_tilde(PlanePoint::new(1.0, 1.0), 1.0).unwrap();
        assert!((v - 1.514).abs() < 1e-3, "{v}");
    }

    #[test]
    fn wrong_shift_is_reported() {
        let pot = ShiftedPotential { c: 1.0, beta: 0.0 };
        assert!(matches!(pot.value(landmarks(1.0).p_star), Err(Error::NegativePotential(_))));
    }

    #[test]
    fn identical_points_cost_nothing() {
        let p = PlanePoint::new(0.3, -0.2);
        assert_eq!(transition_cost(p, p, 1.0).cost, 0.0);
    }

    #[test]
    fn cost_is_symmetric() {
        let lm = landmarks(1.0);
        let a = transition_cost_with(lm.p_star, lm.b_plus, 1.0, &coarse()).cost;
        let b = transition_cost_with(lm.b_plus, lm.p_star, 1.0, &coarse()).cost;
        assert!((a - b).abs() <= 1e-6 * a, "{a} {b}");
    }

    #[test]
    fn refinement_never_exceeds_grid_cost() {
        let lm = landmarks(2.0);
        for pair in Pair::ALL {
            let (a, b) = pair.endpoints(&lm);
            let t = transition_cost_with(a, b, 2.0, &coarse());
            assert!(t.cost <= t.grid_cost);
            assert!(t.cost > 0.0);
        }
    }

    #[test]
    fn straight_segment_quadrature() {
        // Along M1 = 0 at c = 0 the potential is (q^2 - 1)^2 + 1/4, beta = 0.
        let pot = ShiftedPotential::new(0.0);
        let a = PlanePoint::new(-0.5, 0.0);
        let b = PlanePoint::new(0.5, 0.0);
        let c = segment_cost(&pot, a, b);
        let n = 20000;
        let riemann: f64 = (0..n)
            .map(|k| {
                let q = -0.5 + (k as f64 + 0.5) / n as f64;
                ((q * q - 1.0).powi(2) + 0.25).sqrt() / n as f64
            })
            .sum();
        assert!((c - riemann).abs() <= 1e-6);
    }

    #[test]
    fn limit_functional_arithmetic() {
        let table = CostTable {
            c: 1.0,
            costs: vec![
                (Pair::StarStar2, 3.0),
                (Pair::StarBPlus, 4.0),
                (Pair::Star2BMinus, 2.5),
                (Pair::StarBMinus, 0.5),
                (Pair::Star2BPlus, 2.6),
            ],
        };
        let best = minimise_limit_functional_with(&table);
        assert_eq!((best.jumps, best.phases[0]), (0, Phase::PStar));
        assert!((best.j - 4.5).abs() < 1e-15);
        let one = limit_functional(&table, Phase::PStar, 1);
        assert!((one.j - (3.0 + 0.5 + 2.6)).abs() < 1e-15);
        let three = limit_functional(&table, Phase::PStar, 3);
        assert!(three.j > limit_functional(&table, Phase::PStar, 1).j);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn triangle_inequality(a in (-1.5f64..1.5, -2.0f64..2.0), b in (-1.5f64..1.5, -2.0f64..2.0), d in (-1.5f64..1.5, -2.0f64..2.0)) {
            let (a, b, d) = (PlanePoint::new(a.0, a.1), PlanePoint::new(b.0, b.1), PlanePoint::new(d.0, d.1));
            let o = MetricOptions::default();
            let ad = transition_cost_with(a, d, 1.0, &o).cost;
            let ab = transition_cost_with(a, b, 1.0, &o).cost;
            let bd = transition_cost_with(b, d, 1.0, &o).cost;
            prop_assert!(ad <= ab + bd + 1e-6, "{} {} {}", ad, ab, bd);
            prop_assert!(ad >= 0.0);
        }
    }
}
