//! Serialization of artifacts: full JSON, or a CSV projection of the rows.

use std::io::Write;

use serde::Serialize;

use crate::args::Format;
use crate::error::CliError;
use crate::run::{Artifact, Outcome};

#[derive(Serialize)]
struct SampleEntry {
    replica: usize,
    row: usize,
    col: usize,
    value: f64,
}

#[derive(Serialize)]
struct ExpansionRow {
    leading: f64,
    correction_frobenius: f64,
    correction_trace: f64,
    exact: f64,
    remainder: f64,
    frobenius_norm: f64,
    remainder_bound_unit_constant: f64,
    gamma_quotient_residual: Option<f64>,
}

#[derive(Serialize)]
struct AuditRow {
    n: u64,
    m: usize,
    k: usize,
    radius: f64,
    probes: usize,
    observed: f64,
    radius_quartic: f64,
    dimension: f64,
    radius_quadratic: f64,
    implied_constant: f64,
}

#[derive(Serialize)]
struct PointRow {
    log_value: Option<f64>,
    in_support: bool,
    log_gaussian: Option<f64>,
    log_ratio: Option<f64>,
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// CSV rendering: one record per experiment row, sample entry, audited
/// dimension, or a single record for point evaluations.
pub fn to_csv(outcome: &Outcome) -> Result<Vec<u8>, CliError> {
    match outcome {
        Outcome::Samples(samples) => write_rows(samples.iter().flat_map(|s| {
            let cols = s.block.cols();
            s.block
                .entries()
                .iter()
                .enumerate()
                .map(move |(idx, &value)| SampleEntry {
                    replica: s.replica,
                    row: idx / cols,
                    col: idx % cols,
                    value,
                })
        })),
        Outcome::Point(p) => write_rows([PointRow {
            log_value: p.log_value,
            in_support: p.in_support,
            log_gaussian: p.log_gaussian,
            log_ratio: p.log_ratio,
        }]),
        Outcome::Tail(t) => write_rows([t]),
        Outcome::Expansion(e) => write_rows([ExpansionRow {
            leading: e.breakdown.leading,
            correction_frobenius: e.breakdown.correction_frobenius,
            correction_trace: e.breakdown.correction_trace,
            exact: e.breakdown.exact,
            remainder: e.breakdown.remainder,
            frobenius_norm: e.frobenius_norm,
            remainder_bound_unit_constant: e.remainder_bound_unit_constant,
            gamma_quotient_residual: e.gamma_quotient_residual,
        }]),
        Outcome::Audit(reports) => write_rows(reports.iter().map(|r| {
            let terms = r.term_values();
            AuditRow {
                n: r.dims.n,
                m: r.dims.m,
                k: r.dims.k,
                radius: r.radius,
                probes: r.probes,
                observed: r.observed,
                radius_quartic: terms[0],
                dimension: terms[1],
                radius_quadratic: terms[2],
                implied_constant: r.implied_constant,
            }
        })),
        Outcome::Rate(v) => write_rows([v]),
        Outcome::Experiment(rep) => write_rows(&rep.rows),
    }
}

pub fn render(artifact: &Artifact, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(artifact)
                .map_err(|e| CliError::Io(format!("serializing output: {e}")))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => to_csv(&artifact.result),
    }
}

pub fn write(bytes: &[u8], path: Option<&std::path::Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}
