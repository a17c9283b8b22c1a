//! The solver driver: step-size policies, the fixed-step iteration
//! `x^{k+1} = prox_{gamma g}[x^k - gamma v^k]`, the backtracking line-search
//! variant, and per-step diagnostic bookkeeping (trace rows, Lyapunov descent
//! violations, residual-bound violations).

use crate::diag::{self, LineSearchConstants, LyapunovConstants, PhiSchedule};
use crate::error::{Error, Result};
use crate::noise::NoiseSchedule;
use crate::problem::{CompositeProblem, DeltaHistory};
use crate::prox::Regularizer;
use crate::schedule::{Scheduler, SchedulerKind, Selection};
use crate::table::{lag_select, GradientTable};
use crate::vecmath;

/// Which aggregation rule produces `v^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Full gradient every step; the zero-delay degenerate case.
    ProxGrad,
    /// Incremental aggregation: refresh the scheduled components and reuse
    /// the stored rest (scheme I).
    Iag,
    /// Snapshot-corrected aggregation with a per-sweep anchor (scheme II).
    Svrg,
    /// Lazy refresh driven by the gradient-change trigger.
    Lag,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ProxGrad => "prox_grad",
            Scheme::Iag => "iag",
            Scheme::Svrg => "svrg",
            Scheme::Lag => "lag",
        }
    }
}

/// Step-size selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// `gamma = 2c / ((2 tau + 1) L)`; valid only when `g` is convex.
    FixedConvex { c: f64 },
    /// `gamma = c / ((2 tau + 1) L)`; valid for any `g`.
    FixedNonconvex { c: f64 },
    /// Backtracking search over trial steps `eta^j c1` with acceptance
    /// `<v, y - x> + g(y) - g(x) <= -(c2/2) ||y - x||^2`, falling back to the
    /// fixed step `gamma` (chosen by the convexity of `g` from `c`).
    /// `c1 = None` resolves to `100 gamma`, `c2 = None` to `1/gamma`.
    LineSearch {
        c: f64,
        eta: f64,
        c1: Option<f64>,
        c2: Option<f64>,
        j_max: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizePolicy {
    pub mode: StepMode,
}

impl StepSizePolicy {
    pub fn fixed_convex(c: f64) -> Self {
        StepSizePolicy {
            mode: StepMode::FixedConvex { c },
        }
    }

    pub fn fixed_nonconvex(c: f64) -> Self {
        StepSizePolicy {
            mode: StepMode::FixedNonconvex { c },
        }
    }

    pub fn line_search(c: f64, eta: f64, c1: Option<f64>, c2: Option<f64>, j_max: u32) -> Self {
        StepSizePolicy {
            mode: StepMode::LineSearch {
                c,
                eta,
                c1,
                c2,
                j_max,
            },
        }
    }

    pub fn c(&self) -> f64 {
        match self.mode {
            StepMode::FixedConvex { c }
            | StepMode::FixedNonconvex { c }
            | StepMode::LineSearch { c, .. } => c,
        }
    }

    pub fn is_line_search(&self) -> bool {
        matches!(self.mode, StepMode::LineSearch { .. })
    }

    /// The fixed step size (or line-search fallback) for a given problem
    /// scale. Rejects `c` outside `(0,1)` and a convex-only mode on a
    /// nonconvex regularizer.
    pub fn step_size(&self, lipschitz: f64, tau: usize, g_convex: bool) -> Result<f64> {
        let c = self.c();
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::invalid(format!("c must lie in (0,1), got {c}")));
        }
        if !(lipschitz > 0.0) {
            return Err(Error::invalid("Lipschitz constant must be > 0"));
        }
        let denom = (2.0 * tau as f64 + 1.0) * lipschitz;
        match self.mode {
            StepMode::FixedConvex { .. } => {
                if !g_convex {
                    return Err(Error::invalid(
                        "fixed_convex step size requires a convex regularizer",
                    ));
                }
                Ok(2.0 * c / denom)
            }
            StepMode::FixedNonconvex { .. } => Ok(c / denom),
            StepMode::LineSearch { .. } => {
                if g_convex {
                    Ok(2.0 * c / denom)
                } else {
                    Ok(c / denom)
                }
            }
        }
    }
}

/// Stop when the objective has not improved across a window of logged rows.
#[derive(Debug, Clone, Copy)]
pub struct StagnationRule {
    pub window: u64,
    pub tol: f64,
}

pub struct SolverConfig {
    pub scheme: Scheme,
    pub scheduler: SchedulerKind,
    pub noise: NoiseSchedule,
    pub policy: StepSizePolicy,
    pub budget: u64,
    /// Residual stopping tolerance; `0.0` disables early stopping.
    pub tol: f64,
    /// Log every `cadence`-th iteration (plus the final iterate). Per-step
    /// descent checks require `cadence = 1`.
    pub cadence: u64,
    pub x0: Option<Vec<f64>>,
    /// Reference minimum for gap/Lyapunov columns; descent checking works
    /// without it.
    pub f_star: Option<f64>,
    pub record_iterates: bool,
    pub record_steps: bool,
    pub stagnation: Option<StagnationRule>,
}

impl SolverConfig {
    pub fn new(
        scheme: Scheme,
        scheduler: SchedulerKind,
        noise: NoiseSchedule,
        policy: StepSizePolicy,
        budget: u64,
    ) -> Self {
        SolverConfig {
            scheme,
            scheduler,
            noise,
            policy,
            budget,
            tol: 1e-10,
            cadence: 1,
            x0: None,
            f_star: None,
            record_iterates: false,
            record_steps: false,
            stagnation: None,
        }
    }
}

/// One logged row. `delta_norm`, `sigma`, `step`, `residual` and `j_ls`
/// describe the step leaving iterate `k` (`residual` certifies `x^{k+1}`);
/// they are absent on the final row, which no step leaves. `fgap`, `xi` and
/// `f_kappa` require a known `F*`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub f: f64,
    pub fgap: Option<f64>,
    pub delta_norm: Option<f64>,
    pub sigma: Option<f64>,
    pub step: Option<f64>,
    pub residual: Option<f64>,
    pub xi: Option<f64>,
    pub f_kappa: Option<f64>,
    pub j_ls: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Budget,
    ResidualBelow(f64),
    ObjectiveStagnation,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::ResidualBelow(_) => "residual_below",
            Termination::ObjectiveStagnation => "objective_stagnation",
        }
    }
}

/// Per-step debug record for oracle tests (`record_steps`).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: u64,
    /// The aggregate actually used, noise included.
    pub v: Vec<f64>,
    /// The aggregate before noise injection.
    pub v_clean: Vec<f64>,
    pub sigma: f64,
    /// Staleness of each component's contribution to `v^k`.
    pub ages_at_use: Vec<u64>,
    pub refreshed: Vec<usize>,
    /// Set when the periodic exact recompute fired at this step: the freshly
    /// resummed aggregate.
    pub recompute_aggregate: Option<Vec<f64>>,
    /// `last_refresh` snapshot after this step's commits.
    pub last_refresh_after: Vec<u64>,
    pub gamma_used: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CheckCounters {
    pub lyapunov_checked: u64,
    pub lyapunov_violations: u64,
    pub residual_checked: u64,
    pub residual_bound_violations: u64,
    pub ls_accept_steps: u64,
    pub ls_fallback_steps: u64,
    pub ls_invariant_violations: u64,
}

/// Resolved run-level constants, recorded for summaries and offline checks.
#[derive(Debug, Clone)]
pub struct RunConstants {
    pub gamma: f64,
    pub tau: usize,
    pub lipschitz: f64,
    pub g_convex: bool,
    pub lyapunov: Option<LyapunovConstants>,
    pub linesearch: Option<LineSearchConstants>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// True when the per-step Lyapunov descent counter was armed.
    pub descent_checked: bool,
}

pub struct RunResult {
    pub final_x: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub iterations: u64,
    pub constants: RunConstants,
    pub checks: CheckCounters,
    pub iterates: Option<Vec<Vec<f64>>>,
    pub steps: Option<Vec<StepRecord>>,
}

impl RunResult {
    pub fn final_f(&self) -> f64 {
        self.trace.last().map(|r| r.f).unwrap_or(f64::NAN)
    }
}

/// Relative tolerance for the per-step descent and residual-bound checks.
const CHECK_REL_TOL: f64 = 1e-9;

struct LineSearchParams {
    c1: f64,
    c2: f64,
    eta: f64,
    j_max: u32,
    /// Whether `c2` meets the bound `(2 tau + 1) L / c` that guarantees the
    /// per-step Lyapunov descent for accepted and fallback steps alike.
    descent_certified: bool,
}

struct LsOutcome {
    x_next: Vec<f64>,
    gamma_used: f64,
    j_k: Option<u32>,
    accepted: bool,
    invariant_ok: bool,
}

fn prox_step(reg: &Regularizer, x: &[f64], v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let mut z = vec![0.0; x.len()];
    for j in 0..x.len() {
        z[j] = x[j] - gamma * v[j];
    }
    let mut out = vec![0.0; x.len()];
    reg.prox_into(&z, gamma, &mut out)?;
    Ok(out)
}

/// One line-search step: scan `j = 0, 1, ...` for the first accepted trial,
/// then apply the max rule (`eta_k = eta^j c1` if it is at least `gamma`,
/// else `gamma`; exhaustion also falls back to `gamma`). Trial steps that the
/// regularizer rejects (the MCP step bound) count as not accepted.
fn line_search_step(
    reg: &Regularizer,
    x: &[f64],
    v: &[f64],
    gamma: f64,
    params: &LineSearchParams,
) -> Result<LsOutcome> {
    let g_at_x = reg.value(x);
    let mut accepted_at: Option<(u32, f64, Vec<f64>)> = None;
    for j in 0..=params.j_max {
        let s = params.c1 * params.eta.powi(j as i32);
        let y = match prox_step(reg, x, v, s) {
            Ok(y) => y,
            Err(Error::InvalidArgument(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut inner = 0.0;
        let mut dist_sq = 0.0;
        for i in 0..x.len() {
            let d = y[i] - x[i];
            inner += v[i] * d;
            dist_sq += d * d;
        }
        let lhs = inner + reg.value(&y) - g_at_x;
        let rhs = -(params.c2 / 2.0) * dist_sq;
        if lhs <= rhs {
            accepted_at = Some((j, s, y));
            break;
        }
    }
    match accepted_at {
        Some((j, s, y)) if s >= gamma => {
            // re-evaluate the acceptance inequality at the step actually taken
            let mut inner = 0.0;
            let mut dist_sq = 0.0;
            for i in 0..x.len() {
                let d = y[i] - x[i];
                inner += v[i] * d;
                dist_sq += d * d;
            }
            let invariant_ok = inner + reg.value(&y) - g_at_x <= -(params.c2 / 2.0) * dist_sq;
            Ok(LsOutcome {
                x_next: y,
                gamma_used: s,
                j_k: Some(j),
                accepted: true,
                invariant_ok,
            })
        }
        Some((j, _, _)) => {
            // accepted below the fallback: the max rule takes gamma
            let x_next = prox_step(reg, x, v, gamma)?;
            Ok(LsOutcome {
                x_next,
                gamma_used: gamma,
                j_k: Some(j),
                accepted: false,
                invariant_ok: true,
            })
        }
        None => {
            let x_next = prox_step(reg, x, v, gamma)?;
            Ok(LsOutcome {
                x_next,
                gamma_used: gamma,
                j_k: None,
                accepted: false,
                invariant_ok: true,
            })
        }
    }
}

fn validate(problem: &CompositeProblem, config: &SolverConfig) -> Result<()> {
    let m = problem.num_components();
    config.scheduler.validate(m)?;
    match (config.scheme, &config.scheduler) {
        (Scheme::Lag, SchedulerKind::LagTrigger { .. }) => {}
        (Scheme::Lag, _) => {
            return Err(Error::config(
                "lag scheme requires the lag_trigger scheduler",
            ))
        }
        (_, SchedulerKind::LagTrigger { .. }) => {
            return Err(Error::config(
                "lag_trigger scheduler is only valid with the lag scheme",
            ))
        }
        (Scheme::Svrg, SchedulerKind::Cyclic) => {}
        (Scheme::Svrg, _) => return Err(Error::config("svrg requires the cyclic scheduler")),
        _ => {}
    }
    if config.cadence == 0 {
        return Err(Error::config("cadence must be >= 1"));
    }
    if config.tol < 0.0 {
        return Err(Error::config("tol must be >= 0"));
    }
    if config.policy.is_line_search() && !config.noise.is_none() {
        return Err(Error::config(
            "line search is a noise-free scheme; disable noise injection",
        ));
    }
    if let StepMode::LineSearch { eta, c1, c2, .. } = config.policy.mode {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::config("line-search eta must lie in (0,1)"));
        }
        if let Some(c1) = c1 {
            if !(c1 > 0.0) {
                return Err(Error::config("line-search c1 must be > 0"));
            }
        }
        if let Some(c2) = c2 {
            if !(c2 > 0.0) {
                return Err(Error::config("line-search c2 must be > 0"));
            }
        }
    }
    if let Some(x0) = &config.x0 {
        if x0.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: x0.len(),
            });
        }
        if !problem.regularizer().value(x0).is_finite() {
            return Err(Error::config("x0 lies outside the regularizer's domain"));
        }
    }
    Ok(())
}

fn tau_bound(problem: &CompositeProblem, config: &SolverConfig) -> usize {
    match config.scheme {
        Scheme::ProxGrad => 0,
        _ => config.scheduler.tau_bound(problem.num_components()),
    }
}

/// Runs the configured scheme. The trace gets a row every `cadence` steps
/// plus one for the final iterate; per-step Lyapunov and residual-bound
/// violations are counted online.
pub fn run(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunResult> {
    validate(problem, config)?;
    let m = problem.num_components();
    let n = problem.dim();
    let lipschitz = problem.lipschitz_total();
    let g_convex = problem.regularizer().convex();
    let tau = tau_bound(problem, config);
    let gamma = config.policy.step_size(lipschitz, tau, g_convex)?;

    if let Regularizer::Mcp { theta, .. } = problem.regularizer() {
        if gamma >= *theta {
            return Err(Error::config(format!(
                "mcp regularizer needs gamma {gamma} < theta {theta}"
            )));
        }
    }

    // Lyapunov constants for the mode in force.
    let (lyapunov, linesearch) = if config.policy.is_line_search() {
        (
            None,
            Some(diag::linesearch_constants(
                config.policy.c(),
                lipschitz,
                tau,
            )?),
        )
    } else if g_convex {
        (Some(diag::solve_constants(gamma, lipschitz, tau)?), None)
    } else {
        (
            Some(diag::solve_constants_nonconvex(gamma, lipschitz, tau)?),
            None,
        )
    };

    let ls_params = if let StepMode::LineSearch {
        c,
        eta,
        c1,
        c2,
        j_max,
    } = config.policy.mode
    {
        let c1 = c1.unwrap_or(100.0 * gamma);
        let c2 = c2.unwrap_or(1.0 / gamma);
        let lower = if g_convex {
            (2.0 * tau as f64 + 1.0) * lipschitz / (2.0 * c)
        } else {
            (2.0 * tau as f64 + 1.0) * lipschitz / c
        };
        if c2 < lower * (1.0 - 1e-12) {
            return Err(Error::config(format!(
                "line-search c2 = {c2} below the applicable lower bound {lower}"
            )));
        }
        let certified = c2 >= (2.0 * tau as f64 + 1.0) * lipschitz / c * (1.0 - 1e-12);
        Some(LineSearchParams {
            c1,
            c2,
            eta,
            j_max,
            descent_certified: certified,
        })
    } else {
        None
    };

    // Noise tails for the Lyapunov columns, built once per run.
    let tails = config.noise.tail_sq_sums(config.budget + 1);
    let phi = if !config.policy.is_line_search() && g_convex && tau >= 1 {
        PhiSchedule::for_noise(&config.noise).ok()
    } else {
        None
    };

    // Per-step descent is certified for every fixed-step configuration the
    // validation admits; for line search it additionally needs the stronger
    // c2 bound.
    let descent_armed = match &ls_params {
        Some(p) => p.descent_certified,
        None => true,
    };
    let descent_constant = match (&lyapunov, &linesearch) {
        (Some(lc), _) => lc.descent_constant,
        (_, Some(lsc)) => lsc.descent_constant,
        _ => unreachable!(),
    };

    let mut x = match &config.x0 {
        Some(x0) => x0.clone(),
        None => vec![0.0; n],
    };
    let track_points = matches!(
        config.scheduler,
        SchedulerKind::LagTrigger {
            threshold: crate::schedule::LagThreshold::MovementScaled { .. },
            ..
        }
    );
    let mut table = GradientTable::new(m, n, track_points);
    table.warm_start(problem, &x)?;
    let mut scheduler = Scheduler::new(config.scheduler.clone(), m)?;
    let mut history = DeltaHistory::new(tau);

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut checks = CheckCounters::default();
    let mut iterates = if config.record_iterates {
        Some(vec![x.clone()])
    } else {
        None
    };
    let mut steps = if config.record_steps {
        Some(Vec::new())
    } else {
        None
    };

    // internal Lyapunov value of the previous logged row, for descent checks
    let mut prev_row: Option<(u64, f64)> = None;
    let mut prev_delta: Option<f64> = None;
    let mut stagnation_window: std::collections::VecDeque<(u64, f64)> =
        std::collections::VecDeque::new();
    let mut termination = Termination::Budget;

    let internal_xi = |f_now: f64, history: &DeltaHistory, k: u64| -> f64 {
        match (&lyapunov, &linesearch) {
            (Some(lc), _) => diag::lyapunov_basic_shiftfree(f_now, history, lc, tails[k as usize]),
            (_, Some(lsc)) => {
                let w = history.weighted_sum_sq();
                match lsc.epsilon {
                    Some(eps) => f_now + lsc.lipschitz / (2.0 * eps) * w,
                    None => f_now,
                }
            }
            _ => unreachable!(),
        }
    };
    let internal_fk = |f_now: f64, history: &DeltaHistory, k: u64| -> Option<f64> {
        match (&lyapunov, &linesearch) {
            (Some(lc), _) => match &phi {
                Some(ph) => diag::lyapunov_kappa_shiftfree(
                    f_now,
                    history,
                    lc,
                    tails[k as usize],
                    ph.tail_sq(k),
                )
                .ok(),
                None => None,
            },
            (_, Some(lsc)) => lsc
                .kappa_tilde
                .map(|kt| f_now + kt * history.weighted_sum_sq()),
            _ => unreachable!(),
        }
    };

    let mut k: u64 = 0;
    while k < config.budget {
        let logged = k % config.cadence == 0;
        let f_now = if logged {
            Some(problem.full_objective(&x)?)
        } else {
            None
        };

        // aggregate v^k for the scheme in force
        let (v_clean, ages_at_use, refreshed, recompute_aggregate) = match config.scheme {
            Scheme::ProxGrad => {
                let v = table.full_refresh(problem, &x, k)?;
                (v, vec![0u64; m], (0..m).collect::<Vec<_>>(), None)
            }
            Scheme::Iag => {
                let indices = match scheduler.select(k) {
                    Selection::Indices(v) => v,
                    Selection::LagRule => unreachable!(),
                };
                let recomputed = table.refresh_set(problem, &indices, &x, k)?;
                let ages = table.ages(k);
                let rec = if recomputed && config.record_steps {
                    Some(table.aggregate().to_vec())
                } else {
                    None
                };
                (table.aggregate().to_vec(), ages, indices, rec)
            }
            Scheme::Svrg => {
                if k % m as u64 == 0 {
                    table.refresh_snapshot(problem, &x, k)?;
                }
                let i_k = (k % m as u64) as usize;
                let v = table.aggregate_svrg(problem, i_k, &x)?;
                let snap_step = table.snapshot().unwrap().step;
                let ages = (0..m)
                    .map(|i| if i == i_k { 0 } else { k - snap_step })
                    .collect();
                (v, ages, vec![i_k], None)
            }
            Scheme::Lag => {
                let (threshold, hard_cap) = match &config.scheduler {
                    SchedulerKind::LagTrigger {
                        threshold,
                        hard_cap,
                    } => (threshold.clone(), *hard_cap),
                    _ => unreachable!(),
                };
                let set = lag_select(&table, problem, &x, k, &threshold, hard_cap, tau)?;
                let recomputed = table.refresh_set(problem, &set, &x, k)?;
                let ages = table.ages(k);
                let rec = if recomputed && config.record_steps {
                    Some(table.aggregate().to_vec())
                } else {
                    None
                };
                (table.aggregate().to_vec(), ages, set, rec)
            }
        };
        debug_assert!(table.max_age(k) <= tau as u64);

        let mut v = v_clean.clone();
        let sigma = config.noise.apply(&mut v, k);

        // the step
        let (x_next, gamma_used, j_ls) = match &ls_params {
            None => (
                prox_step(problem.regularizer(), &x, &v, gamma)?,
                gamma,
                None,
            ),
            Some(p) => {
                let out = line_search_step(problem.regularizer(), &x, &v, gamma, p)?;
                if out.accepted {
                    checks.ls_accept_steps += 1;
                    if !out.invariant_ok {
                        checks.ls_invariant_violations += 1;
                    }
                } else {
                    checks.ls_fallback_steps += 1;
                }
                (out.x_next, out.gamma_used, out.j_k)
            }
        };

        let delta_norm = vecmath::dist(&x_next, &x);

        if logged {
            let f_now = f_now.unwrap();
            let xi_int = internal_xi(f_now, &history, k);
            let fk_int = internal_fk(f_now, &history, k);

            // Lyapunov descent of the previous step (needs consecutive rows)
            if descent_armed {
                if let (Some((pk, prev_xi)), Some(pd)) = (prev_row, prev_delta) {
                    if pk + 1 == k {
                        checks.lyapunov_checked += 1;
                        let lhs = prev_xi - xi_int;
                        let rhs = descent_constant * pd * pd;
                        if lhs < rhs - CHECK_REL_TOL * (1.0 + prev_xi.abs()) {
                            checks.lyapunov_violations += 1;
                        }
                    }
                }
            }

            // subgradient residual of this step, certifying x^{k+1}
            let r = diag::residual(problem, &x, &x_next, &v, gamma_used)?;
            let rn = vecmath::norm(&r);
            checks.residual_checked += 1;
            let bound = diag::residual_bound(
                delta_norm,
                history.sum_norms(),
                gamma_used,
                lipschitz,
                sigma,
            );
            if rn > bound + CHECK_REL_TOL * (1.0 + bound.abs()) {
                checks.residual_bound_violations += 1;
            }

            trace.push(TraceRow {
                k,
                f: f_now,
                fgap: config.f_star.map(|fs| f_now - fs),
                delta_norm: Some(delta_norm),
                sigma: Some(sigma),
                step: Some(gamma_used),
                residual: Some(rn),
                xi: config.f_star.map(|fs| xi_int - fs),
                f_kappa: config.f_star.and_then(|fs| fk_int.map(|v| v - fs)),
                j_ls,
            });
            prev_row = Some((k, xi_int));

            if let Some(rule) = config.stagnation {
                stagnation_window.push_back((k, f_now));
                while let Some(&(k0, _)) = stagnation_window.front() {
                    if k - k0 > rule.window {
                        stagnation_window.pop_front();
                    } else {
                        break;
                    }
                }
                if let Some(&(k0, f0)) = stagnation_window.front() {
                    if k - k0 >= rule.window && (f0 - f_now).abs() <= rule.tol * (1.0 + f_now.abs())
                    {
                        termination = Termination::ObjectiveStagnation;
                    }
                }
            }

            if config.tol > 0.0 && rn < config.tol {
                termination = Termination::ResidualBelow(config.tol);
            }
        }

        prev_delta = Some(delta_norm);
        history.push(delta_norm);
        if let Some(list) = iterates.as_mut() {
            list.push(x_next.clone());
        }
        if let Some(list) = steps.as_mut() {
            list.push(StepRecord {
                k,
                v: v.clone(),
                v_clean,
                sigma,
                ages_at_use,
                refreshed,
                recompute_aggregate,
                last_refresh_after: (0..m).map(|i| table.last_refresh(i)).collect(),
                gamma_used,
            });
        }
        x = x_next;
        k += 1;
        if !matches!(termination, Termination::Budget) {
            break;
        }
    }

    // final row: the iterate the run ends at, no step leaving it
    let f_final = problem.full_objective(&x)?;
    let xi_int = internal_xi(f_final, &history, k);
    let fk_int = internal_fk(f_final, &history, k);
    if descent_armed {
        if let (Some((pk, prev_xi)), Some(pd)) = (prev_row, prev_delta) {
            if pk + 1 == k {
                checks.lyapunov_checked += 1;
                let lhs = prev_xi - xi_int;
                let rhs = descent_constant * pd * pd;
                if lhs < rhs - CHECK_REL_TOL * (1.0 + prev_xi.abs()) {
                    checks.lyapunov_violations += 1;
                }
            }
        }
    }
    trace.push(TraceRow {
        k,
        f: f_final,
        fgap: config.f_star.map(|fs| f_final - fs),
        delta_norm: None,
        sigma: None,
        step: None,
        residual: None,
        xi: config.f_star.map(|fs| xi_int - fs),
        f_kappa: config.f_star.and_then(|fs| fk_int.map(|v| v - fs)),
        j_ls: None,
    });

    Ok(RunResult {
        final_x: x,
        trace,
        termination,
        iterations: k,
        constants: RunConstants {
            gamma,
            tau,
            lipschitz,
            g_convex,
            lyapunov,
            linesearch,
            c1: ls_params.as_ref().map(|p| p.c1),
            c2: ls_params.as_ref().map(|p| p.c2),
            descent_checked: descent_armed,
        },
        checks,
        iterates,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSchedule;
    use crate::problem::SmoothComponent;

    struct HalfSq;
    impl SmoothComponent for HalfSq {
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * vecmath::norm_sq(x)
        }
        fn grad_accumulate(&self, x: &[f64], out: &mut [f64]) {
            for i in 0..x.len() {
                out[i] += x[i];
            }
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
    }

    fn half_sq_problem(reg: Regularizer) -> CompositeProblem {
        CompositeProblem::new(vec![Box::new(HalfSq)], reg, 1).unwrap()
    }

    #[test]
    fn step_size_formulas() {
        let p = StepSizePolicy::fixed_convex(0.99);
        let g = p.step_size(4.0, 3, true).unwrap();
        assert!((g - 1.98 / 28.0).abs() < 1e-15);

        let p = StepSizePolicy::fixed_nonconvex(0.99);
        let g = p.step_size(4.0, 3, false).unwrap();
        assert!((g - 0.99 / 28.0).abs() < 1e-15);

        let p = StepSizePolicy::fixed_convex(0.5);
        assert_eq!(p.step_size(1.0, 0, true).unwrap(), 1.0);
    }

    #[test]
    fn step_size_rejects_bad_arguments() {
        assert!(StepSizePolicy::fixed_convex(1.0)
            .step_size(1.0, 1, true)
            .is_err());
        assert!(StepSizePolicy::fixed_convex(0.0)
            .step_size(1.0, 1, true)
            .is_err());
        // convex-only mode on a nonconvex regularizer
        assert!(StepSizePolicy::fixed_convex(0.5)
            .step_size(1.0, 1, false)
            .is_err());
        // nonconvex formula is fine for convex g
        assert!(StepSizePolicy::fixed_nonconvex(0.5)
            .step_size(1.0, 1, true)
            .is_ok());
    }

    #[test]
    fn single_quadratic_step_reaches_zero() {
        // f = x^2/2, g = 0, gamma = 2c/L = 1 at c = 0.5: x+ = x - grad = 0
        let p = half_sq_problem(Regularizer::Zero);
        let mut cfg = SolverConfig::new(
            Scheme::ProxGrad,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::fixed_convex(0.5),
            1,
        );
        cfg.x0 = Some(vec![5.0]);
        cfg.tol = 0.0;
        let res = run(&p, &cfg).unwrap();
        assert_eq!(res.final_x, vec![0.0]);
        assert_eq!(res.trace.len(), 2);
        assert_eq!(res.trace[0].delta_norm, Some(5.0));
    }

    #[test]
    fn zero_budget_gives_single_row() {
        let p = half_sq_problem(Regularizer::Zero);
        let mut cfg = SolverConfig::new(
            Scheme::ProxGrad,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::fixed_convex(0.5),
            0,
        );
        cfg.x0 = Some(vec![1.0]);
        let res = run(&p, &cfg).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace[0].k, 0);
        assert_eq!(res.trace[0].delta_norm, None);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let p = half_sq_problem(Regularizer::L1 { weight: 0.1 });
        let make = || {
            let mut cfg = SolverConfig::new(
                Scheme::Iag,
                SchedulerKind::Cyclic,
                NoiseSchedule::new(
                    crate::noise::NoiseKind::Geometric {
                        amplitude: 0.5,
                        zeta: 0.9,
                    },
                    77,
                )
                .unwrap(),
                StepSizePolicy::fixed_convex(0.9),
                200,
            );
            cfg.x0 = Some(vec![3.0]);
            cfg.tol = 0.0;
            cfg
        };
        let a = run(&p, &make()).unwrap();
        let b = run(&p, &make()).unwrap();
        assert_eq!(a.final_x, b.final_x);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn line_search_accepts_stationary_point() {
        // v = 0 at the minimum of f with g == 0: y = x, both sides zero,
        // accepted at j = 0 with the max rule.
        let p = half_sq_problem(Regularizer::Zero);
        let mut cfg = SolverConfig::new(
            Scheme::ProxGrad,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::line_search(0.5, 0.5, None, None, 60),
            1,
        );
        cfg.x0 = Some(vec![0.0]);
        cfg.tol = 0.0;
        let res = run(&p, &cfg).unwrap();
        assert_eq!(res.trace[0].j_ls, Some(0));
        assert_eq!(res.checks.ls_accept_steps, 1);
        assert_eq!(res.final_x, vec![0.0]);
    }

    #[test]
    fn line_search_smallest_j_matches_closed_form() {
        // f = x^2/2, g = 0, x = 1, v = 1: acceptance iff s <= 2/c2.
        // With c1 = 8, eta = 1/2, c2 = 1: first s <= 2 is s = 8 * (1/2)^2 = 2.
        let reg = Regularizer::Zero;
        let params = LineSearchParams {
            c1: 8.0,
            c2: 1.0,
            eta: 0.5,
            j_max: 60,
            descent_certified: false,
        };
        let out = line_search_step(&reg, &[1.0], &[1.0], 0.1, &params).unwrap();
        assert_eq!(out.j_k, Some(2));
        assert_eq!(out.gamma_used, 2.0);
        assert!(out.accepted);
        // x+ = x - s v = -1
        assert_eq!(out.x_next, vec![-1.0]);
    }

    #[test]
    fn line_search_exhaustion_falls_back_to_gamma() {
        // c2 enormous: nothing is accepted, eta_k = gamma
        let reg = Regularizer::Zero;
        let params = LineSearchParams {
            c1: 1.0,
            c2: 1e30,
            eta: 0.5,
            j_max: 8,
            descent_certified: false,
        };
        let out = line_search_step(&reg, &[1.0], &[1.0], 0.125, &params).unwrap();
        assert_eq!(out.j_k, None);
        assert!(!out.accepted);
        assert_eq!(out.gamma_used, 0.125);
    }

    #[test]
    fn line_search_c2_below_bound_is_rejected() {
        // convex g: the acceptance parameter must satisfy
        // c2 >= (2 tau + 1) L / (2 c); half of that is rejected
        let p = half_sq_problem(Regularizer::L1 { weight: 0.1 });
        let c = 0.5;
        let l = p.lipschitz_total();
        let tau = 1.0; // single component, cyclic
        let bound = (2.0 * tau + 1.0) * l / (2.0 * c);
        let cfg = SolverConfig::new(
            Scheme::Iag,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::line_search(c, 0.5, None, Some(bound / 2.0), 60),
            10,
        );
        assert!(matches!(run(&p, &cfg), Err(Error::Config(_))));
        let cfg = SolverConfig::new(
            Scheme::Iag,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::line_search(c, 0.5, None, Some(bound), 60),
            10,
        );
        assert!(run(&p, &cfg).is_ok());
    }

    #[test]
    fn stagnation_rule_stops_a_flat_run() {
        // started at the minimum, the objective never moves
        let p = half_sq_problem(Regularizer::Zero);
        let mut cfg = SolverConfig::new(
            Scheme::ProxGrad,
            SchedulerKind::Cyclic,
            NoiseSchedule::none(),
            StepSizePolicy::fixed_convex(0.5),
            1000,
        );
        cfg.x0 = Some(vec![0.0]);
        cfg.tol = 0.0;
        cfg.stagnation = Some(StagnationRule {
            window: 10,
            tol: 1e-12,
        });
        let res = run(&p, &cfg).unwrap();
        assert_eq!(res.termination, Termination::ObjectiveStagnation);
        assert!(res.iterations <= 12);
    }

    #[test]
    fn line_search_with_noise_is_rejected() {
        let p = half_sq_problem(Regularizer::Zero);
        let cfg = SolverConfig::new(
            Scheme::ProxGrad,
            SchedulerKind::Cyclic,
            NoiseSchedule::new(
                crate::noise::NoiseKind::Geometric {
                    amplitude: 1.0,
                    zeta: 0.5,
                },
                0,
            )
            .unwrap(),
            StepSizePolicy::line_search(0.5, 0.5, None, None, 60),
            10,
        );
        assert!(matches!(run(&p, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn scheme_scheduler_compatibility() {
        let p = half_sq_problem(Regularizer::Zero);
        let cfg = SolverConfig::new(
            Scheme::Svrg,
            SchedulerKind::ShuffledCyclic { seed: 1 },
            NoiseSchedule::none(),
            StepSizePolicy::fixed_convex(0.5),
            10,
        );
        assert!(matches!(run(&p, &cfg), Err(Error::Config(_))));
    }
}
