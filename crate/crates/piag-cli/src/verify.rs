//! Offline re-verification of an emitted trace against its summary: row
//! sanity, Lyapunov reconstruction and per-step descent, and the residual
//! norm bound, all from logged scalars alone.

use crate::traceio::Summary;
use crate::{CliError, Result};
use piag::diag;
use piag::{DeltaHistory, NoiseKind, NoiseSchedule, TraceRow};

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub rows: usize,
    /// Rows form the consecutive `k = 0, 1, 2, ...` sequence required for
    /// per-step checks.
    pub consecutive: bool,
    pub lyapunov_checked: u64,
    pub lyapunov_violations: u64,
    pub residual_checked: u64,
    pub residual_violations: u64,
    /// Rows whose logged `xi` disagrees with the value reconstructed from
    /// the summary constants.
    pub xi_mismatches: u64,
}

impl VerifyReport {
    pub fn violations(&self) -> u64 {
        self.lyapunov_violations + self.residual_violations + self.xi_mismatches
    }
}

const REL_TOL: f64 = 1e-9;

fn noise_from_summary(summary: &Summary) -> Result<NoiseSchedule> {
    let kind = match summary.noise_kind.as_str() {
        "none" => NoiseKind::None,
        "geometric" => NoiseKind::Geometric {
            amplitude: summary
                .noise_amplitude
                .ok_or_else(|| CliError::config("summary lacks noise_amplitude"))?,
            zeta: summary
                .noise_zeta
                .ok_or_else(|| CliError::config("summary lacks noise_zeta"))?,
        },
        "power" => NoiseKind::Power {
            amplitude: summary
                .noise_amplitude
                .ok_or_else(|| CliError::config("summary lacks noise_amplitude"))?,
            exponent: summary
                .noise_eta
                .ok_or_else(|| CliError::config("summary lacks noise_eta"))?,
        },
        other => return Err(CliError::config(format!("unknown noise kind '{other}'"))),
    };
    Ok(NoiseSchedule::new(kind, summary.noise_seed)?)
}

/// Re-checks a trace offline. Monotone `k` and finite fields are always
/// verified; the Lyapunov and residual inequalities additionally need the
/// rows to be consecutive (a cadence-1 trace).
pub fn verify(trace: &[TraceRow], summary: &Summary) -> Result<VerifyReport> {
    if trace.is_empty() {
        return Err(CliError::config("empty trace"));
    }
    let mut report = VerifyReport {
        rows: trace.len(),
        consecutive: true,
        ..Default::default()
    };

    // row sanity: strictly increasing k, finite numerics
    let mut prev_k: Option<u64> = None;
    for row in trace {
        if let Some(pk) = prev_k {
            if row.k <= pk {
                return Err(CliError::config(format!(
                    "trace k values not strictly increasing at k = {}",
                    row.k
                )));
            }
            if row.k != pk + 1 {
                report.consecutive = false;
            }
        } else if row.k != 0 {
            report.consecutive = false;
        }
        for (name, v) in [
            ("F", Some(row.f)),
            ("Fgap", row.fgap),
            ("delta_norm", row.delta_norm),
            ("sigma", row.sigma),
            ("step", row.step),
            ("residual", row.residual),
            ("xi", row.xi),
            ("Fk", row.f_kappa),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(CliError::config(format!(
                        "non-finite {name} at k = {}",
                        row.k
                    )));
                }
            }
        }
        prev_k = Some(row.k);
    }
    if !report.consecutive {
        return Ok(report);
    }

    let tau = summary.tau;
    let l = summary.lipschitz_total;
    let is_line_search = summary.step_mode == "line_search";
    let lyapunov = if is_line_search {
        None
    } else if summary.g_convex {
        Some(diag::solve_constants(summary.gamma, l, tau)?)
    } else {
        Some(diag::solve_constants_nonconvex(summary.gamma, l, tau)?)
    };
    let linesearch = if is_line_search {
        Some(diag::linesearch_constants(summary.c, l, tau)?)
    } else {
        None
    };
    let descent_constant = lyapunov
        .as_ref()
        .map(|c| c.descent_constant)
        .or(linesearch.as_ref().map(|c| c.descent_constant))
        .unwrap();
    let descent_armed = match (&linesearch, summary.c2) {
        (Some(_), Some(c2)) => c2 >= (2.0 * tau as f64 + 1.0) * l / summary.c * (1.0 - 1e-12),
        (Some(_), None) => false,
        (None, _) => true,
    };

    let noise = noise_from_summary(summary)?;
    let k_max = trace.last().unwrap().k;
    let tails = noise.tail_sq_sums(k_max + 1);

    let mut history = DeltaHistory::new(tau);
    let mut prev_xi: Option<f64> = None;
    let mut prev_delta: Option<f64> = None;
    for row in trace {
        // reconstruct the internal (unshifted) Lyapunov value
        let xi_int = match (&lyapunov, &linesearch) {
            (Some(lc), _) => {
                diag::lyapunov_basic_shiftfree(row.f, &history, lc, tails[row.k as usize])
            }
            (_, Some(lsc)) => match lsc.epsilon {
                Some(eps) => row.f + l / (2.0 * eps) * history.weighted_sum_sq(),
                None => row.f,
            },
            _ => unreachable!(),
        };
        if let (Some(logged_xi), Some(fs)) = (row.xi, summary.f_star) {
            if (xi_int - fs - logged_xi).abs() > REL_TOL * (1.0 + logged_xi.abs()) {
                report.xi_mismatches += 1;
            }
        }
        if descent_armed {
            if let (Some(pxi), Some(pd)) = (prev_xi, prev_delta) {
                report.lyapunov_checked += 1;
                if pxi - xi_int < descent_constant * pd * pd - REL_TOL * (1.0 + pxi.abs()) {
                    report.lyapunov_violations += 1;
                }
            }
        }
        if let (Some(rn), Some(dn), Some(step), Some(sigma)) =
            (row.residual, row.delta_norm, row.step, row.sigma)
        {
            report.residual_checked += 1;
            let bound = diag::residual_bound(dn, history.sum_norms(), step, l, sigma);
            if rn > bound + REL_TOL * (1.0 + bound.abs()) {
                report.residual_violations += 1;
            }
        }
        if let Some(dn) = row.delta_norm {
            history.push(dn);
            prev_delta = Some(dn);
        } else {
            prev_delta = None;
        }
        prev_xi = Some(xi_int);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::*;
    use crate::runner::execute;

    fn toy_config() -> RunConfig {
        RunConfig {
            problem: ProblemSpec::Lasso {
                n: 5,
                m: 8,
                seed: 3,
                sparsity: 0.4,
            },
            regularizer: RegSpec {
                kind: RegKind::L1,
                lambda: 0.2,
                radius: RadiusSpec::Auto,
                theta: 4.0,
            },
            solver: {
                let mut s = SolverSpec::default();
                s.budget = 300;
                s.tol = 0.0;
                s
            },
            noise: NoiseSpec::None,
            output: OutputSpec {
                dir: "out".into(),
                name: "verify_toy".into(),
            },
        }
    }

    #[test]
    fn verify_accepts_a_clean_run() {
        let exec = execute(&toy_config()).unwrap();
        let report = verify(&exec.result.trace, &exec.summary).unwrap();
        assert!(report.consecutive);
        assert_eq!(report.violations(), 0);
        assert_eq!(report.lyapunov_checked, 300);
        assert_eq!(report.residual_checked, 300);
    }

    #[test]
    fn verify_flags_a_tampered_trace() {
        let exec = execute(&toy_config()).unwrap();
        let mut rows = exec.result.trace.clone();
        // corrupt one objective value mid-run
        let mid = rows.len() / 2;
        rows[mid].f += 1.0;
        if let Some(x) = rows[mid].xi.as_mut() {
            *x += 1.0;
        }
        let report = verify(&rows, &exec.summary).unwrap();
        assert!(report.lyapunov_violations > 0);
    }

    #[test]
    fn verify_survives_round_trip_through_csv() {
        let exec = execute(&toy_config()).unwrap();
        let text = crate::traceio::format_trace(&exec.result.trace);
        let rows = crate::traceio::parse_trace(&text).unwrap();
        assert_eq!(rows, exec.result.trace);
        let report = verify(&rows, &exec.summary).unwrap();
        assert_eq!(report.violations(), 0);
    }
}
