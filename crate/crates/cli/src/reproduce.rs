//! Canonical pipelines behind each figure.

use std::path::Path;

use anyhow::{bail, Result};

use ferrobvp::asymptotics::{geometric_grid, ExpansionOrder};
use ferrobvp::continuation::{continue_in_l, ContinuationOptions};
use ferrobvp::deflation::{discover_solutions, guess_suite, DiscoveryOptions};
use ferrobvp::gamma::{landmarks, minimise_limit_functional_with, transition_cost_with, CostTable, MetricOptions, Pair};
use ferrobvp::io::{fmt_f64, write_json, write_rows};
use ferrobvp::{Mesh, ModelParams, Problem, System};

use crate::{bulk_rows, ensure_dir, write_continuation, write_solution_set, write_study, Run};

pub const FIGURES: [&str; 11] = ["fig1", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12"];

fn deflate_into(run: &mut Run, dir: &Path, l: f64, c: f64, system: System, random: usize) -> Result<usize> {
    let problem = Problem::new(Mesh::new(1000)?, ModelParams::symmetric(l, c)?, system);
    let guesses = guess_suite(&problem, random, 0);
    let found = discover_solutions(&problem, &guesses, &[], &DiscoveryOptions::default());
    write_solution_set(run, dir, &problem, &found)?;
    Ok(found.len())
}

fn continuation_into(run: &mut Run, dir: &Path, c: f64, l0: f64, l1: f64, step: f64) -> Result<()> {
    let result = continue_in_l(c, l0, l1, step, System::Full, &ContinuationOptions::default())?;
    write_continuation(run, dir, &result, 1000, 1.0)
}

pub fn run(figure: &str, out: &Path, run: Result<Run>) -> Result<()> {
    if !FIGURES.contains(&figure) {
        bail!("unknown figure {figure:?}; known: {}", FIGURES.join(", "));
    }
    let mut run = run?;
    ensure_dir(out)?;
    match figure {
        "fig1" => {
            let cs: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
            let rows: Vec<Vec<String>> = bulk_rows(&cs, 1.0)?.into_iter().filter(|r| r[1].starts_with("coupled")).collect();
            let p = out.join("bulk_energy.csv");
            write_rows(&p, &["c", "branch", "parity", "rho", "sigma", "energy"], rows)?;
            run.record(&p);
        }
        "fig3" => {
            let cs = geometric_grid(1e-3, 1e-1, 8);
            for order in [ExpansionOrder::Zero, ExpansionOrder::One, ExpansionOrder::Two] {
                write_study(&mut run, out, order, &cs, 1000)?;
            }
        }
        "fig4" => {
            let c = 1.0;
            let lm = landmarks(c);
            let opts = MetricOptions::default();
            let mut costs = Vec::new();
            let mut rows = Vec::new();
            for (n, pair) in Pair::ALL.into_iter().enumerate() {
                let (a, b) = pair.endpoints(&lm);
                let t = transition_cost_with(a, b, c, &opts);
                let p = out.join(format!("path-{n}.csv"));
                write_rows(&p, &["q11", "m1"], t.path.nodes.iter().map(|q| vec![fmt_f64(q.q11), fmt_f64(q.m1)]))?;
                run.record(&p);
                rows.push(vec![pair.label().to_string(), fmt_f64(t.cost), fmt_f64(t.grid_cost)]);
                costs.push((pair, t.cost));
            }
            let p = out.join("costs.csv");
            write_rows(&p, &["pair", "cost", "grid_cost"], rows)?;
            run.record(&p);
            let best = minimise_limit_functional_with(&CostTable { c, costs });
            let p = out.join("limit_structure.json");
            write_json(&p, &best)?;
            run.record(&p);
        }
        "fig5" => {
            let n = deflate_into(&mut run, out, 10.0, 1.0, System::Full, 8)?;
            println!("{n} solution(s) at l = 10");
        }
        "fig6" => {
            deflate_into(&mut run, out, 0.01, 1.0, System::Or, 4)?;
        }
        "fig7" => {
            deflate_into(&mut run, out, 0.01, 5.0, System::Or, 4)?;
        }
        "fig8" => continuation_into(&mut run, out, 1.0, 3.0, 0.2, 0.01)?,
        "fig9" => {
            deflate_into(&mut run, out, 0.2, 1.0, System::Full, 4)?;
        }
        "fig10" => {
            for c in [1.0, 5.0] {
                deflate_into(&mut run, &out.join(format!("c{c}")), 0.01, c, System::Full, 4)?;
            }
        }
        "fig11" => continuation_into(&mut run, out, 5.0, 3.0, 5.0, 0.015)?,
        "fig12" => {
            deflate_into(&mut run, out, 4.43, 5.0, System::Full, 4)?;
        }
        _ => unreachable!("checked above"),
    }
    run.finish(out)
}
