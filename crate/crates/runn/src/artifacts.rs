//! CSV artifacts. Every file has a fixed header row and LF line endings.

use std::io::Write;
use std::path::Path;

use runn_core::formulations::ExactSolution;
use runn_core::linlab::SweepRow;
use runn_core::quadrature::VarianceTable;
use runn_core::spectral::SpectrumCurve;
use runn_core::uzawa::{evaluate_solution, UzawaState};
use serde::Serialize;

use crate::Error;

/// Points of the solution grid.
pub const SOLUTION_POINTS: usize = 2001;

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<(), Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct ConvergenceRow {
    pub phase: usize,
    /// Epoch counted across all phases.
    pub epoch: usize,
    pub loss: f64,
    pub relative_error: Option<f64>,
}

pub const CONVERGENCE_HEADER: [&str; 4] = ["phase", "epoch", "loss", "relative_error"];

pub fn convergence_rows(state: &UzawaState) -> Vec<ConvergenceRow> {
    let mut out = Vec::new();
    let mut offset = 0;
    for rec in &state.history {
        for e in &rec.history {
            out.push(ConvergenceRow {
                phase: rec.phase.index(),
                epoch: offset + e.epoch,
                loss: e.loss,
                relative_error: e.relative_error,
            });
        }
        offset += rec.history.len();
    }
    out
}

pub fn write_convergence(path: &Path, state: &UzawaState) -> Result<(), Error> {
    write_rows(path, &CONVERGENCE_HEADER, convergence_rows(state))
}

pub const SPECTRUM_HEADER: [&str; 3] = ["omega", "weighted_power", "ncpsd"];

pub fn write_spectrum(path: &Path, curve: Option<&SpectrumCurve>) -> Result<(), Error> {
    let rows = curve
        .into_iter()
        .flat_map(|c| (0..c.omegas.len()).map(move |i| (c.omegas[i], c.power[i], c.ncpsd[i])));
    write_rows(path, &SPECTRUM_HEADER, rows)
}

pub const SOLUTION_HEADER: [&str; 4] = ["x", "u", "u_exact", "error"];

/// Iterate, exact solution and pointwise error on `SOLUTION_POINTS` uniform points.
pub fn write_solution(path: &Path, state: &UzawaState, exact: Option<&ExactSolution>) -> Result<(), Error> {
    let (a, b) = runn_core::DOMAIN;
    let h = (b - a) / (SOLUTION_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..SOLUTION_POINTS).map(|i| a + h * i as f64).collect();
    let u = evaluate_solution(state, &xs, false)?.u;
    let rows = xs.iter().zip(&u).map(|(&x, &v)| {
        let e = exact.map(|s| s.eval(x)[0]);
        (x, v, e, e.map(|e| v - e))
    });
    write_rows(path, &SOLUTION_HEADER, rows)
}

pub const SWEEP_HEADER: [&str; 9] = [
    "problem",
    "approach",
    "mode",
    "fraction",
    "epsilon",
    "rho",
    "measured_rate",
    "bound_rate",
    "converged",
];

#[derive(Debug, Clone)]
pub struct LabeledSweepRow {
    pub problem: usize,
    pub approach: u8,
    pub mode: &'static str,
    pub fraction: f64,
    pub row: SweepRow,
}

pub fn write_sweep(path: &Path, rows: &[LabeledSweepRow]) -> Result<(), Error> {
    let flat = rows.iter().map(|r| {
        (
            r.problem,
            r.approach,
            r.mode,
            r.fraction,
            r.row.epsilon,
            r.row.rho,
            r.row.measured_rate,
            r.row.bound_rate,
            r.row.converged,
        )
    });
    write_rows(path, &SWEEP_HEADER, flat)
}

pub const VARIANCE_HEADER: [&str; 4] = ["rule", "elements", "nodes", "variance"];

pub fn write_variance(path: &Path, tables: &[VarianceTable]) -> Result<(), Error> {
    let rows = tables
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| (r.rule.name(), r.elements, r.nodes, r.variance)));
    write_rows(path, &VARIANCE_HEADER, rows)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
