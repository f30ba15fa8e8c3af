//! CSV and JSON artefacts: solution profiles, sidecars, diagrams and manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::{diagnostics, FieldState, Mesh};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stability::StabilityReport;

/// Seventeen significant digits, enough for a lossless round trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    if s == "nan" {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

pub const SOLUTION_HEADER: [&str; 9] = ["y", "Q11", "Q12", "M1", "M2", "|Q|", "|M|", "theta", "phi"];

/// JSON written next to every solution CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSidecar {
    pub params: ModelParams,
    pub system: String,
    pub n_cells: usize,
    pub energy: f64,
    pub residual: f64,
    #[serde(default)]
    pub origin: Option<String>,
    #[serde(default)]
    pub stability: Option<StabilityReport>,
}

pub fn write_solution_csv(path: &Path, state: &FieldState) -> Result<()> {
    let d = diagnostics(state);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SOLUTION_HEADER)?;
    for (i, y) in state.mesh.nodes.iter().enumerate() {
        let row = [*y, state.q11[i], state.q12[i], state.m1[i], state.m2[i], d.q_norm[i], d.m_norm[i], d.theta[i], d.phi[i]];
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_solution_csv(path: &Path) -> Result<FieldState> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for rec in r.records() {
        let rec = rec?;
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(parse_f64(rec.get(k).ok_or_else(|| Error::Format("short row".into()))?)?);
        }
    }
    let n_cells = cols[0].len().checked_sub(1).ok_or_else(|| Error::Format("empty solution".into()))?;
    let mesh = Mesh::new(n_cells)?;
    let [_, q11, q12, m1, m2] = cols;
    Ok(FieldState { mesh, q11, q12, m1, m2 })
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
pub fn write_solution(dir: &Path, name: &str, state: &FieldState, sidecar: &SolutionSidecar) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{name}.csv"));
    write_solution_csv(&csv_path, state)?;
    write_json(&dir.join(format!("{name}.json")), sidecar)?;
    Ok(csv_path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes a CSV with a header and rows of already formatted fields.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Record of one run, enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
}
