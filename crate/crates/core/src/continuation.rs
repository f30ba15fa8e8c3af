//! Natural-parameter continuation in `l = l1 = l2` at fixed coupling, with
//! deflated discovery of new branches and bracketing of bifurcations.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deflation::{
    deflated_solve, discover_solutions, guess_suite, DeflationOperator, DiscoveryOptions, DISTINCT_TOL,
};
use crate::discretization::{integral_q12, Mesh, Problem, System};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_rows};
use crate::newton::{newton_solve, SolveOptions};
use crate::params::ModelParams;
use crate::stability::{hessian_spectrum_with_hint, smallest_eigenpairs, Verdict};

/// Two post-bifurcation states are mutual flips when closer than this under the flip map.
pub const FLIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub l: f64,
    pub energy: f64,
    /// `int Q12 dy`, identically zero on OR states.
    pub functional: f64,
    pub verdict: Verdict,
    pub index: usize,
    pub smallest_eigenvalue: f64,
    pub residual: f64,
    #[serde(skip)]
    pub state: Option<Vec<f64>>,
    #[serde(skip)]
    step: usize,
}

/// How a branch stops before the end of the parameter range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ending {
    /// Warm-started Newton failed: the branch turned back or vanished.
    Lost { l_lo: f64, l_hi: f64 },
    /// The branch collapsed onto another branch.
    Merged { l_lo: f64, l_hi: f64, into: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    /// Ordered by continuation step (increasing distance from the start of the range).
    pub points: Vec<BranchPoint>,
    pub parent_event: Option<usize>,
    /// Name of the guess or mechanism that produced the branch.
    pub origin: String,
    /// Where the branch first appears, if not at the start of the range.
    pub birth: Option<Ending>,
    pub ending: Option<Ending>,
}

impl Branch {
    pub fn l_range(&self) -> (f64, f64) {
        let a = self.points.first().map_or(f64::NAN, |p| p.l);
        let b = self.points.last().map_or(f64::NAN, |p| p.l);
        (a.min(b), a.max(b))
    }

    pub fn point_at(&self, l: f64) -> Option<&BranchPoint> {
        self.points.iter().find(|p| (p.l - l).abs() < 1e-9)
    }

    pub fn is_or(&self) -> bool {
        self.points.iter().all(|p| p.functional.abs() <= 1e-10)
    }

    fn point_at_step(&self, step: usize) -> Option<&BranchPoint> {
        self.points.iter().find(|p| p.step == step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Pitchfork,
    Fold,
    Unclassified,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Pitchfork => "pitchfork",
            EventKind::Fold => "fold",
            EventKind::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub l_lo: f64,
    pub l_hi: f64,
    pub kind: EventKind,
    pub branches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub n_cells: usize,
    pub xi: f64,
    pub solve: SolveOptions,
    /// Random guesses added to the initial discovery suite.
    pub n_random: usize,
    pub seed: u64,
    /// Newton iterations allowed in the per-step deflation pass.
    pub pass_iters: usize,
    /// Run the full guess suite again every this many steps (0 disables).
    pub rediscover_every: usize,
    /// Eigenvalues computed per point.
    pub n_eigen: usize,
    /// Keep the solution vectors in the returned branches.
    pub keep_states: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            n_cells: 1000,
            xi: 1.0,
            solve: SolveOptions::default(),
            n_random: 0,
            seed: 1,
            pass_iters: 30,
            rediscover_every: 10,
            n_eigen: 3,
            keep_states: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationResult {
    pub c: f64,
    pub system: System,
    pub branches: Vec<Branch>,
    pub events: Vec<BifurcationEvent>,
}

impl ContinuationResult {
    /// Branches with a stable point at `l`.
    pub fn stable_at(&self, l: f64) -> Vec<usize> {
        self.branches
            .iter()
            .filter(|b| b.point_at(l).is_some_and(|p| p.verdict == Verdict::Stable))
            .map(|b| b.id)
            .collect()
    }
}

struct Tracker<'a> {
    base: Problem,
    ls: Vec<f64>,
    opts: &'a ContinuationOptions,
    branches: Vec<Branch>,
}

impl Tracker<'_> {
    fn problem(&self, step: usize) -> Problem {
        let params = self.base.params.with_l(self.ls[step]).expect("positive l");
        self.base.with_params(params)
    }

    fn point(&self, step: usize, x: Vec<f64>, hint: Option<f64>) -> Option<BranchPoint> {
        let p = self.problem(step);
        let residual = crate::discretization::euclid_norm(&p.residual(&x));
        let report = hessian_spectrum_with_hint(&p, &x, self.opts.n_eigen, hint).ok()?;
        Some(BranchPoint {
            l: self.ls[step],
            energy: p.energy(&x),
            functional: integral_q12(&p.field_state(&x)),
            verdict: report.verdict,
            index: report.index,
            smallest_eigenvalue: report.smallest_eigenvalues[0],
            residual,
            state: Some(x),
            step,
        })
    }

    /// Live states at `step` other than branch `skip`.
    fn states_at(&self, step: usize, skip: Option<usize>) -> Vec<(usize, &Vec<f64>)> {
        self.branches
            .iter()
            .filter(|b| Some(b.id) != skip)
            .filter_map(|b| b.point_at_step(step).and_then(|p| p.state.as_ref()).map(|s| (b.id, s)))
            .collect()
    }

    fn new_branch(&mut self, origin: String, first: BranchPoint) -> usize {
        let id = self.branches.len();
        self.branches.push(Branch {
            id,
            points: vec![first],
            parent_event: None,
            origin,
            birth: None,
            ending: None,
        });
        id
    }

    /// Continues branch `id` from its first point back towards step 0 and
    /// records where it is born.
    fn trace_back(&mut self, id: usize) {
        loop {
            let first = &self.branches[id].points[0];
            let step = first.step;
            if step == 0 {
                return;
            }
            let x0 = first.state.clone().expect("live state");
            let hint = Some(first.smallest_eigenvalue);
            let target = step - 1;
            let p = self.problem(target);
            let rep = newton_solve(&p, &x0, &self.opts.solve);
            let (l_lo, l_hi) = bracket(self.ls[target], self.ls[step]);
            if !rep.converged {
                self.branches[id].birth = Some(Ending::Lost { l_lo, l_hi });
                return;
            }
            if let Some(other) = self.closest(target, &rep.final_state, Some(id)) {
                self.branches[id].birth = Some(Ending::Merged { l_lo, l_hi, into: other });
                return;
            }
            match self.point(target, rep.final_state, hint) {
                Some(pt) => self.branches[id].points.insert(0, pt),
                None => {
                    self.branches[id].birth = Some(Ending::Lost { l_lo, l_hi });
                    return;
                }
            }
        }
    }

    fn closest(&self, step: usize, x: &[f64], skip: Option<usize>) -> Option<usize> {
        let p = self.problem(step);
        self.states_at(step, skip)
            .into_iter()
            .map(|(id, s)| (id, p.distance(x, s)))
            .filter(|(_, d)| *d < DISTINCT_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
    }

    /// Adds every new solution in `found` as a branch traced back to its birth.
    fn admit(&mut self, step: usize, found: Vec<(String, Vec<f64>)>) {
        let p = self.problem(step);
        for (origin, x) in found {
            if self.states_at(step, None).iter().any(|(_, s)| p.distance(&x, s) < DISTINCT_TOL) {
                continue;
            }
            if let Some(pt) = self.point(step, x, None) {
                let id = self.new_branch(origin, pt);
                self.trace_back(id);
            }
        }
    }

    fn live(&self, step: usize) -> Vec<usize> {
        self.branches
            .iter()
            .filter(|b| b.ending.is_none() && b.points.last().is_some_and(|p| p.step == step))
            .map(|b| b.id)
            .collect()
    }

    /// Warm-starts every live branch at `step`; branches that fail or
    /// collapse onto an older branch are ended.
    fn advance(&mut self, step: usize) {
        let p = self.problem(step);
        let live = self.live(step - 1);
        let results: Vec<(usize, Option<BranchPoint>)> = live
            .par_iter()
            .map(|&id| {
                let b = &self.branches[id];
                let last = b.points.last().expect("nonempty");
                let x0 = last.state.as_ref().expect("live state");
                let mut rep = newton_solve(&p, x0, &self.opts.solve);
                if !rep.converged && b.points.len() >= 2 {
                    // Secant predictor as a fallback.
                    let prev = b.points[b.points.len() - 2].state.as_ref().expect("live state");
                    let pred: Vec<f64> = x0.iter().zip(prev).map(|(a, q)| 2.0 * a - q).collect();
                    rep = newton_solve(&p, &pred, &self.opts.solve);
                }
                let pt = rep.converged.then(|| self.point(step, rep.final_state, Some(last.smallest_eigenvalue))).flatten();
                (id, pt)
            })
            .collect();
        let (l_lo, l_hi) = bracket(self.ls[step - 1], self.ls[step]);
        for (id, pt) in results {
            let Some(pt) = pt else {
                self.branches[id].ending = Some(Ending::Lost { l_lo, l_hi });
                continue;
            };
            let x = pt.state.as_ref().expect("fresh state");
            let older = self
                .states_at(step, Some(id))
                .into_iter()
                .find(|(o, s)| *o < id && p.distance(x, s) < DISTINCT_TOL)
                .map(|(o, _)| o);
            let Some(into) = older else {
                self.branches[id].points.push(pt);
                continue;
            };
            // Near a bifurcation the warm start may fall onto the parent
            // branch; deflating the other states keeps the branch alive.
            let others: Vec<Vec<f64>> = self.states_at(step, Some(id)).into_iter().map(|(_, s)| s.clone()).collect();
            let last = self.branches[id].points.last().expect("nonempty");
            let hint = Some(last.smallest_eigenvalue);
            let x0 = last.state.clone().expect("live state");
            let reach = 3.0 * p.distance(x, &x0) + DISTINCT_TOL;
            let rep = deflated_solve(&p, &x0, &DeflationOperator::new(others), &self.opts.solve);
            let nearby = rep.converged && p.distance(&rep.final_state, &x0) <= reach;
            match nearby.then(|| self.point(step, rep.final_state, hint)).flatten() {
                Some(pt) => self.branches[id].points.push(pt),
                None => self.branches[id].ending = Some(Ending::Merged { l_lo, l_hi, into }),
            }
        }
    }

    /// Deflated solves from the previous-step states (and their flips) with
    /// every current state deflated.
    fn deflation_pass(&mut self, step: usize) {
        let p = self.problem(step);
        let current: Vec<Vec<f64>> = self.states_at(step, None).into_iter().map(|(_, s)| s.clone()).collect();
        let op = DeflationOperator::new(current);
        let mut seeds: Vec<(String, Vec<f64>)> = Vec::new();
        for (id, s) in self.states_at(step - 1, None) {
            seeds.push((format!("deflated from branch {id}"), s.clone()));
            if p.system == System::Full {
                seeds.push((format!("deflated from flip of branch {id}"), p.flip(s)));
            }
        }
        // Branch switching along the critical eigenvectors where the index changed.
        for b in &self.branches {
            let (Some(now), Some(before)) = (b.point_at_step(step), b.point_at_step(step - 1)) else { continue };
            if now.index == before.index {
                continue;
            }
            let x = now.state.as_ref().expect("live state");
            for (k, v) in critical_directions(&p, x, now.index.max(before.index)).into_iter().enumerate() {
                for sgn in [1.0, -1.0] {
                    let seed: Vec<f64> = x.iter().zip(&v).map(|(a, d)| a + sgn * SWITCH_AMPLITUDE * d).collect();
                    seeds.push((format!("switched from branch {} along mode {k}", b.id), seed));
                }
            }
        }
        let opts = SolveOptions { max_iters: self.opts.pass_iters, ..self.opts.solve };
        let found: Vec<(String, Vec<f64>)> = seeds
            .par_iter()
            .filter_map(|(name, s)| {
                let rep = deflated_solve(&p, s, &op, &opts);
                rep.converged.then(|| (name.clone(), rep.final_state))
            })
            .collect();
        let found = with_flips(&p, found);
        self.admit(step, found);
    }

    fn rediscover(&mut self, step: usize) {
        let p = self.problem(step);
        let known: Vec<Vec<f64>> = self.states_at(step, None).into_iter().map(|(_, s)| s.clone()).collect();
        let guesses = guess_suite(&p, self.opts.n_random, self.opts.seed);
        let dopts = DiscoveryOptions { per_guess: 2, solve: self.opts.solve, ..Default::default() };
        let found = discover_solutions(&p, &guesses, &known, &dopts);
        self.admit(step, found.into_iter().map(|d| (d.origin, d.state)).collect());
    }
}

/// Distance of branch-switching seeds from the parent state.
const SWITCH_AMPLITUDE: f64 = 0.1;

/// The `count` lowest Hessian eigenvectors at `x` as full dof vectors with unit distance.
fn critical_directions(p: &Problem, x: &[f64], count: usize) -> Vec<Vec<f64>> {
    let a = p.interior_hessian(x);
    let Ok(pairs) = smallest_eigenpairs(&a, count.max(1), None) else { return Vec::new() };
    let zero = vec![0.0; x.len()];
    pairs
        .vectors
        .into_iter()
        .map(|v| {
            let mut d = zero.clone();
            d[p.interior()].copy_from_slice(&v);
            let n = p.distance(&d, &zero);
            d.iter_mut().for_each(|e| *e /= n);
            d
        })
        .collect()
}

fn bracket(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

/// Appends the flip of every full-system solution.
fn with_flips(p: &Problem, found: Vec<(String, Vec<f64>)>) -> Vec<(String, Vec<f64>)> {
    if p.system != System::Full {
        return found;
    }
    let mut out = Vec::with_capacity(2 * found.len());
    for (name, x) in found {
        let f = p.flip(&x);
        out.push((name.clone(), x));
        out.push((format!("{name}/flip"), f));
    }
    out
}

/// Parameter grid from `l_start` to `l_end` (either direction) in steps of `step`.
pub fn l_grid(l_start: f64, l_end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(l_start > 0.0) || !(l_end > 0.0) {
        return Err(Error::InvalidParameter(format!("need positive l range and step, got {l_start}:{l_end} by {step}")));
    }
    let n = ((l_end - l_start).abs() / step + 1e-9).floor() as usize;
    let dir = if l_end >= l_start { 1.0 } else { -1.0 };
    // Rounded so that grid values print as typed (1.3 rather than 1.2999999999999998).
    Ok((0..=n).map(|k| ((l_start + dir * step * k as f64) * 1e12).round() / 1e12).collect())
}

/// Marches `l` from `l_start` to `l_end` at coupling `c`.
pub fn continue_in_l(
    c: f64,
    l_start: f64,
    l_end: f64,
    step: f64,
    system: System,
    opts: &ContinuationOptions,
) -> Result<ContinuationResult> {
    let ls = l_grid(l_start, l_end, step)?;
    let params = ModelParams::new(ls[0], ls[0], c, opts.xi)?;
    let base = Problem::new(Mesh::new(opts.n_cells)?, params, system);
    let mut t = Tracker { base, ls, opts, branches: Vec::new() };

    t.rediscover(0);
    for k in 1..t.ls.len() {
        t.advance(k);
        t.deflation_pass(k);
        if opts.rediscover_every > 0 && k % opts.rediscover_every == 0 {
            t.rediscover(k);
        }
    }
    let mut branches = t.branches;
    let events = classify(&t.base, &mut branches);
    if !opts.keep_states {
        for b in branches.iter_mut() {
            b.points.iter_mut().for_each(|pt| pt.state = None);
        }
    }
    Ok(ContinuationResult { c, system, branches, events })
}

/// Turns index changes, births and endings into events.
fn classify(problem: &Problem, branches: &mut [Branch]) -> Vec<BifurcationEvent> {
    // (l_lo, l_hi, branch) for every index change along a branch.
    let mut crossings: Vec<(f64, f64, usize)> = Vec::new();
    for b in branches.iter() {
        for w in b.points.windows(2) {
            if w[0].index != w[1].index {
                let (lo, hi) = bracket(w[0].l, w[1].l);
                crossings.push((lo, hi, b.id));
            }
        }
    }
    // Births and endings as (l_lo, l_hi, branch, parent).
    let mut attached: Vec<(f64, f64, usize, Option<usize>)> = Vec::new();
    for b in branches.iter() {
        for e in [b.birth, b.ending].into_iter().flatten() {
            match e {
                Ending::Lost { l_lo, l_hi } => attached.push((l_lo, l_hi, b.id, None)),
                Ending::Merged { l_lo, l_hi, into } => attached.push((l_lo, l_hi, b.id, Some(into))),
            }
        }
    }
    let width = crossings.iter().map(|c| c.1 - c.0).chain(attached.iter().map(|a| a.1 - a.0)).fold(0.0, f64::max);
    let near = |a: (f64, f64), b: (f64, f64)| a.0 <= b.1 + 2.0 * width && b.0 <= a.1 + 2.0 * width;

    let mut events = Vec::new();
    let mut used = vec![false; attached.len()];
    for &(lo, hi, parent) in &crossings {
        let kids: Vec<usize> = attached
            .iter()
            .enumerate()
            .filter(|(i, a)| !used[*i] && a.3 == Some(parent) && near((lo, hi), (a.0, a.1)))
            .map(|(i, _)| i)
            .collect();
        let pair = kids.iter().enumerate().find_map(|(n, &i)| {
            kids[n + 1..].iter().find(|&&j| mutual_flips(problem, &branches[attached[i].2], &branches[attached[j].2])).map(|&j| (i, j))
        });
        let (kind, ids) = match pair {
            Some((i, j)) => {
                used[i] = true;
                used[j] = true;
                (EventKind::Pitchfork, vec![parent, attached[i].2, attached[j].2])
            }
            None => (EventKind::Unclassified, vec![parent]),
        };
        events.push(BifurcationEvent { l_lo: lo, l_hi: hi, kind, branches: ids });
    }
    // Remaining births and endings, grouped by bracket.
    let mut rest: Vec<(f64, f64, usize, Option<usize>)> =
        attached.iter().enumerate().filter(|(i, _)| !used[*i]).map(|(_, a)| *a).collect();
    rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut i = 0;
    while i < rest.len() {
        let (lo, hi) = (rest[i].0, rest[i].1);
        let mut ids = Vec::new();
        let mut merged = false;
        let mut j = i;
        while j < rest.len() && (rest[j].0 - lo).abs() < 1e-9 {
            ids.push(rest[j].2);
            if let Some(p) = rest[j].3 {
                merged = true;
                if !ids.contains(&p) {
                    ids.push(p);
                }
            }
            j += 1;
        }
        let kind = if merged { EventKind::Unclassified } else { EventKind::Fold };
        events.push(BifurcationEvent { l_lo: lo, l_hi: hi, kind, branches: ids });
        i = j;
    }
    events.sort_by(|a, b| a.l_lo.total_cmp(&b.l_lo));
    for b in branches.iter_mut() {
        let born = b.birth.map(ending_bracket);
        b.parent_event = events.iter().position(|e| {
            let here = born.is_some_and(|br| near(br, (e.l_lo, e.l_hi)));
            here && e.branches.contains(&b.id) && (e.kind != EventKind::Pitchfork || e.branches[0] != b.id)
        });
    }
    events
}

fn ending_bracket(e: Ending) -> (f64, f64) {
    match e {
        Ending::Lost { l_lo, l_hi } | Ending::Merged { l_lo, l_hi, .. } => (l_lo, l_hi),
    }
}

/// Whether two branches are flips of each other at every common parameter.
fn mutual_flips(problem: &Problem, a: &Branch, b: &Branch) -> bool {
    let mut any = false;
    for pa in &a.points {
        if let Some(pb) = b.point_at(pa.l) {
            any = true;
            if (pa.functional + pb.functional).abs() > FLIP_TOL.max(1e-8 * pa.functional.abs())
                || (pa.energy - pb.energy).abs() > 1e-8 * (1.0 + pa.energy.abs())
            {
                return false;
            }
            if let (Some(x), Some(y)) = (&pa.state, &pb.state) {
                if problem.distance(&problem.flip(x), y) > FLIP_TOL {
                    return false;
                }
            }
        }
    }
    any
}

/// Writes `branches.csv` and `events.csv` into `dir`.
pub fn diagram_emit(result: &ContinuationResult, dir: &Path) -> Result<()> {
    if result.branches.is_empty() {
        return Err(Error::InvalidParameter("no branches to emit".into()));
    }
    let rows = result.branches.iter().flat_map(|b| {
        b.points.iter().map(move |p| {
            vec![
                b.id.to_string(),
                fmt_f64(p.l),
                fmt_f64(p.functional),
                fmt_f64(p.energy),
                p.verdict.as_str().to_string(),
                fmt_f64(p.smallest_eigenvalue),
            ]
        })
    });
    write_rows(
        &dir.join("branches.csv"),
        &["branch_id", "l", "functional", "energy", "stability", "smallest_eigenvalue"],
        rows,
    )?;
    let ev = result.events.iter().map(|e| {
        vec![
            fmt_f64(e.l_lo),
            fmt_f64(e.l_hi),
            e.kind.as_str().to_string(),
            e.branches.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "),
        ]
    });
    write_rows(&dir.join("events.csv"), &["l_lo", "l_hi", "kind", "branches"], ev)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_opts() -> ContinuationOptions {
        ContinuationOptions { n_cells: 100, rediscover_every: 0, ..Default::default() }
    }

    #[test]
    fn grid_runs_both_ways() {
        let up = l_grid(0.2, 0.3, 0.05).unwrap();
        assert_eq!(up.len(), 3);
        let down = l_grid(3.0, 2.9, 0.01).unwrap();
        assert_eq!(down.len(), 11);
        assert!((down[10] - 2.9).abs() < 1e-12);
        assert!(l_grid(1.0, 2.0, 0.0).is_err());
        assert!(l_grid(-1.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn large_l_has_a_single_stable_branch() {
        let r = continue_in_l(1.0, 3.0, 2.8, 0.05, System::Full, &small_opts()).unwrap();
        assert_eq!(r.branches.len(), 1, "{:?}", r.branches.iter().map(|b| &b.origin).collect::<Vec<_>>());
        let b = &r.branches[0];
        assert_eq!(b.points.len(), 5);
        assert!(b.points.iter().all(|p| p.verdict == Verdict::Stable && p.residual <= 1e-8));
        assert!(b.is_or());
        assert!(r.events.is_empty());
    }

    #[test]
    fn energy_is_continuous_along_branches() {
        let r = continue_in_l(1.0, 2.0, 1.6, 0.02, System::Or, &small_opts()).unwrap();
        for b in &r.branches {
            let de: Vec<f64> = b.points.windows(2).map(|w| (w[1].energy - w[0].energy).abs()).collect();
            let k = de.iter().cloned().fold(0.0, f64::max) / 0.02;
            assert!(k < 10.0, "{k}");
        }
    }

    #[test]
    fn emitted_diagram_has_one_row_per_point() {
        let r = continue_in_l(1.0, 3.0, 2.9, 0.05, System::Or, &small_opts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        diagram_emit(&r, dir.path()).unwrap();
        let rows = std::fs::read_to_string(dir.path().join("branches.csv")).unwrap();
        assert_eq!(rows.lines().count(), 1 + 3);
        assert!(rows.lines().skip(1).all(|l| l.starts_with("0,")));
        let ev = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
        assert_eq!(ev.lines().count(), 1);
    }
}
