//! Trace CSV and summary JSON emission.
//!
//! The CSV contract: fixed header `k,F,Fgap,delta_norm,sigma,step,residual,xi,Fk,j_ls`,
//! one row per logged iterate, floats printed with 17 significant digits
//! (round-trip exact), empty cells for absent optional fields, LF endings.

use crate::{CliError, Result};
use piag::TraceRow;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const TRACE_HEADER: &str = "k,F,Fgap,delta_norm,sigma,step,residual,xi,Fk,j_ls";

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 128 + 64);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_float(r.f),
            fmt_opt(r.fgap),
            fmt_opt(r.delta_norm),
            fmt_opt(r.sigma),
            fmt_opt(r.step),
            fmt_opt(r.residual),
            fmt_opt(r.xi),
            fmt_opt(r.f_kappa),
            r.j_ls.map(|j| j.to_string()).unwrap_or_default(),
        );
        s.push('\n');
    }
    s
}

pub fn emit_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_trace(rows)).map_err(|e| CliError::io(path, e))
}

fn parse_opt(field: &str, line: usize, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| CliError::parse(line, format!("invalid {what} '{field}'")))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        Some((_, other)) => {
            return Err(CliError::parse(
                1,
                format!("unexpected header '{other}', want '{TRACE_HEADER}'"),
            ))
        }
        None => return Err(CliError::parse(1, "empty trace file")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CliError::parse(
                line_no,
                format!("expected 10 fields, got {}", fields.len()),
            ));
        }
        let k: u64 = fields[0]
            .parse()
            .map_err(|_| CliError::parse(line_no, format!("invalid k '{}'", fields[0])))?;
        let f: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::parse(line_no, format!("invalid F '{}'", fields[1])))?;
        let j_ls =
            if fields[9].is_empty() {
                None
            } else {
                Some(fields[9].parse::<u32>().map_err(|_| {
                    CliError::parse(line_no, format!("invalid j_ls '{}'", fields[9]))
                })?)
            };
        rows.push(TraceRow {
            k,
            f,
            fgap: parse_opt(fields[2], line_no, "Fgap")?,
            delta_norm: parse_opt(fields[3], line_no, "delta_norm")?,
            sigma: parse_opt(fields[4], line_no, "sigma")?,
            step: parse_opt(fields[5], line_no, "step")?,
            residual: parse_opt(fields[6], line_no, "residual")?,
            xi: parse_opt(fields[7], line_no, "xi")?,
            f_kappa: parse_opt(fields[8], line_no, "Fk")?,
            j_ls,
        });
    }
    Ok(rows)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_trace(&text)
}

/// Run summary: resolved constants, termination, violation counters, and
/// fitted rates. Everything offline verification needs to re-check a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub scheme: String,
    pub scheduler: String,
    pub step_mode: String,
    pub n: usize,
    pub m: usize,
    pub tau: usize,
    pub lipschitz_total: f64,
    pub g_kind: String,
    pub g_convex: bool,
    pub lambda: Option<f64>,
    pub radius: Option<f64>,
    pub theta: Option<f64>,
    pub gamma: f64,
    pub c: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub ls_eta: Option<f64>,
    pub j_max: Option<u32>,
    pub noise_kind: String,
    pub noise_amplitude: Option<f64>,
    pub noise_zeta: Option<f64>,
    pub noise_eta: Option<f64>,
    pub noise_seed: u64,
    pub budget: u64,
    pub cadence: u64,
    pub tol: f64,
    pub seed: u64,
    pub f_star: Option<f64>,
    pub f_star_iterations: Option<u64>,
    pub f_star_residual: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta_descent: Option<f64>,
    pub delta_rate: Option<f64>,
    pub kappa: Option<f64>,
    pub descent_constant: f64,
    pub descent_checked: bool,
    pub iterations: u64,
    pub termination: String,
    pub final_f: f64,
    pub lyapunov_checked: u64,
    pub lyapunov_violations: u64,
    pub residual_checked: u64,
    pub residual_bound_violations: u64,
    pub ls_accept_steps: u64,
    pub ls_fallback_steps: u64,
    pub ls_invariant_violations: u64,
    pub rates: Option<RatesSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesSummary {
    pub sublinear_sup_head: f64,
    pub sublinear_sup_tail: f64,
    pub sublinear_trend_slope: f64,
    pub linear_omega: Option<f64>,
    pub linear_r2: Option<f64>,
    pub linear_points: Option<usize>,
}

pub fn summary_to_string(summary: &Summary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    std::fs::write(path, summary_to_string(summary)?).map_err(|e| CliError::io(path, e))
}

pub fn load_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
