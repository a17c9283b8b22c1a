//! Glue from a parsed `RunConfig` to a solver run: problem assembly,
//! reference solves for `F*`, execution, rate fitting, and summary assembly.

use crate::config::*;
use crate::traceio::{RatesSummary, Summary};
use crate::{CliError, Result};
use piag::solver::{RunResult, Scheme, SolverConfig, StepSizePolicy};
use piag::{
    diag, logistic_component, quadratic_component, reference_prox_grad, squared_logistic_component,
    CompositeProblem, LagThreshold, NoiseKind, NoiseSchedule, Regularizer, SchedulerKind,
    SmoothComponent,
};

pub struct BuiltProblem {
    pub problem: CompositeProblem,
    pub g_kind: String,
    pub lambda: Option<f64>,
    pub radius: Option<f64>,
    pub theta: Option<f64>,
}

fn resolve_regularizer(spec: &RegSpec, b_norm_sq: Option<f64>) -> Result<Regularizer> {
    Ok(match spec.kind {
        RegKind::Zero => Regularizer::Zero,
        RegKind::L1 => Regularizer::L1 {
            weight: spec.lambda,
        },
        RegKind::L1Box => {
            let radius = match spec.radius {
                RadiusSpec::Fixed(r) => r,
                RadiusSpec::Auto => b_norm_sq.ok_or_else(|| {
                    CliError::config(
                        "radius = auto needs a least-squares problem (it uses ||b||^2)",
                    )
                })?,
            };
            Regularizer::L1Box {
                weight: spec.lambda,
                radius,
            }
        }
        RegKind::Mcp => Regularizer::Mcp {
            weight: spec.lambda,
            theta: spec.theta,
        },
    })
}

fn loss_components(
    samples: Vec<piag::LabeledSample>,
    loss: LossKind,
) -> Vec<Box<dyn SmoothComponent>> {
    samples
        .into_iter()
        .map(|s| match loss {
            LossKind::Logistic => Box::new(logistic_component(s)) as Box<dyn SmoothComponent>,
            LossKind::SquaredLogistic => {
                Box::new(squared_logistic_component(s)) as Box<dyn SmoothComponent>
            }
        })
        .collect()
}

pub fn build_problem(cfg: &RunConfig) -> Result<BuiltProblem> {
    let (components, dim, b_norm_sq): (Vec<Box<dyn SmoothComponent>>, usize, Option<f64>) =
        match &cfg.problem {
            ProblemSpec::Lasso {
                n,
                m,
                seed,
                sparsity,
            } => {
                let inst = crate::synth::make_lasso(*n, *m, *seed, *sparsity);
                let comps = inst
                    .rows
                    .into_iter()
                    .zip(inst.targets)
                    .map(|(row, b)| {
                        Box::new(quadratic_component(row, b)) as Box<dyn SmoothComponent>
                    })
                    .collect();
                (comps, *n, Some(inst.b_norm_sq))
            }
            ProblemSpec::RestrictedSc { n, m, rank, seed } => {
                if *rank < 1 || *rank > (*n).min(*m) {
                    return Err(CliError::config(format!(
                        "rank {rank} must lie in [1, min({n},{m})]"
                    )));
                }
                let inst = crate::synth::make_restricted_sc(*n, *m, *rank, *seed);
                let comps = inst
                    .rows
                    .into_iter()
                    .zip(inst.targets)
                    .map(|(row, b)| {
                        Box::new(quadratic_component(row, b)) as Box<dyn SmoothComponent>
                    })
                    .collect();
                (comps, *n, Some(inst.b_norm_sq))
            }
            ProblemSpec::Classification {
                n,
                m,
                seed,
                label_noise,
                loss,
                subsample,
            } => {
                let mut samples = crate::synth::make_classification(*n, *m, *seed, *label_noise);
                if let Some(ss) = subsample {
                    samples.truncate(*ss);
                }
                (loss_components(samples, *loss), *n, None)
            }
            ProblemSpec::Libsvm {
                path,
                loss,
                n_override,
                subsample,
                scale_features,
            } => {
                let mut data = crate::libsvm::load_libsvm(std::path::Path::new(path), *n_override)?;
                if let Some(ss) = subsample {
                    data.samples.truncate(*ss);
                }
                if *scale_features {
                    crate::libsvm::max_abs_scale(&mut data.samples, data.dim);
                }
                (loss_components(data.samples, *loss), data.dim, None)
            }
        };
    let regularizer = resolve_regularizer(&cfg.regularizer, b_norm_sq)?;
    let (lambda, radius, theta) = match &regularizer {
        Regularizer::Zero => (None, None, None),
        Regularizer::L1 { weight } => (Some(*weight), None, None),
        Regularizer::L1Box { weight, radius } => (Some(*weight), Some(*radius), None),
        Regularizer::Mcp { weight, theta } => (Some(*weight), None, Some(*theta)),
    };
    let g_kind = cfg.regularizer.kind.as_str().to_string();
    let problem = CompositeProblem::new(components, regularizer, dim)?;
    Ok(BuiltProblem {
        problem,
        g_kind,
        lambda,
        radius,
        theta,
    })
}

pub fn scheduler_kind(cfg: &RunConfig) -> SchedulerKind {
    if cfg.solver.scheme == SchemeSpec::Lag {
        let threshold = match cfg.solver.lag_threshold {
            LagThresholdSpec::Constant(v) => LagThreshold::Constant(v),
            LagThresholdSpec::Movement(theta) => LagThreshold::MovementScaled { theta },
        };
        return SchedulerKind::LagTrigger {
            threshold,
            hard_cap: cfg.solver.lag_hard_cap,
        };
    }
    match &cfg.solver.scheduler {
        SchedulerSpec::Cyclic => SchedulerKind::Cyclic,
        SchedulerSpec::Shuffled { seed } => SchedulerKind::ShuffledCyclic {
            seed: seed.unwrap_or(cfg.solver.seed),
        },
        SchedulerSpec::SyntheticDelay { delays } => SchedulerKind::SyntheticDelay {
            delays: delays.clone(),
        },
    }
}

pub fn noise_schedule(cfg: &RunConfig) -> Result<NoiseSchedule> {
    let kind = match cfg.noise {
        NoiseSpec::None => NoiseKind::None,
        NoiseSpec::Geometric { amplitude, zeta } => NoiseKind::Geometric { amplitude, zeta },
        NoiseSpec::Power { amplitude, eta } => NoiseKind::Power {
            amplitude,
            exponent: eta,
        },
    };
    Ok(NoiseSchedule::new(kind, cfg.solver.seed)?)
}

pub fn solver_config(cfg: &RunConfig) -> Result<SolverConfig> {
    let scheme = match cfg.solver.scheme {
        SchemeSpec::ProxGrad => Scheme::ProxGrad,
        SchemeSpec::Iag => Scheme::Iag,
        SchemeSpec::Svrg => Scheme::Svrg,
        SchemeSpec::Lag => Scheme::Lag,
    };
    let policy = match cfg.solver.step {
        StepSpec::FixedConvex => StepSizePolicy::fixed_convex(cfg.solver.c),
        StepSpec::FixedNonconvex => StepSizePolicy::fixed_nonconvex(cfg.solver.c),
        StepSpec::LineSearch => StepSizePolicy::line_search(
            cfg.solver.c,
            cfg.solver.eta,
            match cfg.solver.c1 {
                AutoOr::Auto => None,
                AutoOr::Value(v) => Some(v),
            },
            match cfg.solver.c2 {
                AutoOr::Auto => None,
                AutoOr::Value(v) => Some(v),
            },
            cfg.solver.j_max,
        ),
    };
    let mut sc = SolverConfig::new(
        scheme,
        scheduler_kind(cfg),
        noise_schedule(cfg)?,
        policy,
        cfg.solver.budget,
    );
    sc.tol = cfg.solver.tol;
    sc.cadence = cfg.solver.cadence;
    Ok(sc)
}

pub struct Execution {
    pub result: RunResult,
    pub summary: Summary,
}

/// Default accuracy of the reference solve producing `F*`.
pub const REFERENCE_TOL: f64 = 1e-13;
pub const REFERENCE_MAX_ITER: u64 = 1_000_000;

/// Builds everything from the config and runs it. `f_star = auto` first runs
/// the zero-delay reference solver on the same problem.
pub fn execute(cfg: &RunConfig) -> Result<Execution> {
    let built = build_problem(cfg)?;
    let mut sc = solver_config(cfg)?;
    let mut f_star_info: Option<(f64, u64, f64)> = None;
    match cfg.solver.f_star {
        FStarSpec::None => {}
        FStarSpec::Value(v) => {
            sc.f_star = Some(v);
            f_star_info = Some((v, 0, f64::NAN));
        }
        FStarSpec::Auto => {
            let reference = reference_prox_grad(&built.problem, REFERENCE_TOL, REFERENCE_MAX_ITER)?;
            sc.f_star = Some(reference.f_star);
            f_star_info = Some((reference.f_star, reference.iterations, reference.residual));
        }
    }
    let result = piag::solver::run(&built.problem, &sc)?;
    let summary = summarize(cfg, &built, &sc, &result, f_star_info)?;
    Ok(Execution { result, summary })
}

fn summarize(
    cfg: &RunConfig,
    built: &BuiltProblem,
    sc: &SolverConfig,
    result: &RunResult,
    f_star_info: Option<(f64, u64, f64)>,
) -> Result<Summary> {
    let rates = match (sc.f_star, built.problem.regularizer().convex()) {
        (Some(fs), true) => {
            let ks: Vec<u64> = result.trace.iter().map(|r| r.k).collect();
            let fvals: Vec<f64> = result.trace.iter().map(|r| r.f).collect();
            match diag::fit_rates(&ks, &fvals, fs) {
                Ok(report) => Some(RatesSummary {
                    sublinear_sup_head: report.sublinear.sup_head,
                    sublinear_sup_tail: report.sublinear.sup_tail,
                    sublinear_trend_slope: report.sublinear.trend_slope,
                    linear_omega: report.linear.as_ref().map(|l| l.omega),
                    linear_r2: report.linear.as_ref().map(|l| l.r2),
                    linear_points: report.linear.as_ref().map(|l| l.points),
                }),
                Err(piag::Error::InconsistentReference { f_star, observed }) => {
                    return Err(CliError::Core(piag::Error::InconsistentReference {
                        f_star,
                        observed,
                    }))
                }
                Err(_) => None,
            }
        }
        _ => None,
    };
    let scheduler_name = match &sc.scheduler {
        SchedulerKind::Cyclic => "cyclic",
        SchedulerKind::ShuffledCyclic { .. } => "shuffled",
        SchedulerKind::SyntheticDelay { .. } => "synthetic_delay",
        SchedulerKind::LagTrigger { .. } => "lag_trigger",
    };
    let (noise_kind, noise_amplitude, noise_zeta, noise_eta) = match sc.noise.kind {
        NoiseKind::None => ("none", None, None, None),
        NoiseKind::Geometric { amplitude, zeta } => {
            ("geometric", Some(amplitude), Some(zeta), None)
        }
        NoiseKind::Power {
            amplitude,
            exponent,
        } => ("power", Some(amplitude), None, Some(exponent)),
    };
    let lc = &result.constants;
    Ok(Summary {
        name: cfg.output.name.clone(),
        scheme: cfg.solver.scheme.as_str().to_string(),
        scheduler: scheduler_name.to_string(),
        step_mode: cfg.solver.step.as_str().to_string(),
        n: built.problem.dim(),
        m: built.problem.num_components(),
        tau: lc.tau,
        lipschitz_total: lc.lipschitz,
        g_kind: built.g_kind.clone(),
        g_convex: lc.g_convex,
        lambda: built.lambda,
        radius: built.radius,
        theta: built.theta,
        gamma: lc.gamma,
        c: cfg.solver.c,
        c1: lc.c1,
        c2: lc.c2,
        ls_eta: if cfg.solver.step == StepSpec::LineSearch {
            Some(cfg.solver.eta)
        } else {
            None
        },
        j_max: if cfg.solver.step == StepSpec::LineSearch {
            Some(cfg.solver.j_max)
        } else {
            None
        },
        noise_kind: noise_kind.to_string(),
        noise_amplitude,
        noise_zeta,
        noise_eta,
        noise_seed: sc.noise.seed,
        budget: sc.budget,
        cadence: sc.cadence,
        tol: sc.tol,
        seed: cfg.solver.seed,
        f_star: sc.f_star,
        f_star_iterations: f_star_info.map(|(_, it, _)| it),
        f_star_residual: f_star_info.and_then(|(_, _, r)| if r.is_nan() { None } else { Some(r) }),
        epsilon: lc
            .lyapunov
            .as_ref()
            .and_then(|l| l.epsilon)
            .or(lc.linesearch.as_ref().and_then(|l| l.epsilon)),
        delta_descent: lc.lyapunov.as_ref().map(|l| l.delta_descent),
        delta_rate: lc.lyapunov.as_ref().and_then(|l| l.delta_rate),
        kappa: lc
            .lyapunov
            .as_ref()
            .and_then(|l| l.kappa)
            .or(lc.linesearch.as_ref().and_then(|l| l.kappa_tilde)),
        descent_constant: lc
            .lyapunov
            .as_ref()
            .map(|l| l.descent_constant)
            .or(lc.linesearch.as_ref().map(|l| l.descent_constant))
            .unwrap_or(f64::NAN),
        descent_checked: lc.descent_checked,
        iterations: result.iterations,
        termination: result.termination.as_str().to_string(),
        final_f: result.final_f(),
        lyapunov_checked: result.checks.lyapunov_checked,
        lyapunov_violations: result.checks.lyapunov_violations,
        residual_checked: result.checks.residual_checked,
        residual_bound_violations: result.checks.residual_bound_violations,
        ls_accept_steps: result.checks.ls_accept_steps,
        ls_fallback_steps: result.checks.ls_fallback_steps,
        ls_invariant_violations: result.checks.ls_invariant_violations,
        rates,
    })
}

/// Writes the trace CSV and summary JSON pair to `dir` under `name`.
pub fn emit_outputs(
    exec: &Execution,
    dir: &std::path::Path,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let trace_path = dir.join(format!("{}.trace.csv", exec.summary.name));
    let summary_path = dir.join(format!("{}.summary.json", exec.summary.name));
    crate::traceio::emit_trace(&exec.result.trace, &trace_path)?;
    crate::traceio::write_summary(&exec.summary, &summary_path)?;
    Ok((trace_path, summary_path))
}
