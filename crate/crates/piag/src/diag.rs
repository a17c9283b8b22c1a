//! Convergence diagnostics: the Lyapunov constants and functions that govern
//! per-step descent of the delayed-gradient iteration, the subgradient
//! residual certificate, and sublinear/linear rate fitting.
//!
//! Notation used throughout: `L` the total gradient Lipschitz constant,
//! `tau` the uniform staleness bound, `gamma` the step size, and `rho` the
//! effective inverse step (`1/gamma` when the regularizer is convex,
//! `1/(2 gamma)` when it is not — the nonconvex prox inequality only yields
//! half the quadratic term).

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSchedule};
use crate::problem::{CompositeProblem, DeltaHistory};
use crate::vecmath;

/// Constants entering the delay-weighted Lyapunov function
///
/// ```text
/// xi_k = F(x^k) + (L / 2 eps) * sum_{d=k-tau}^{k-1} (d-(k-tau)+1) ||Delta^d||^2
///        + (1 / 2 delta) * sum_{i>=k} sigma_i^2  -  min F .
/// ```
///
/// `eps` solves `eps + 1/eps = 1 + (rho/L - 1/2)/tau`; we keep the root
/// `>= 1`, which minimizes the weight `L/(2 eps)`. Both roots satisfy the
/// defining identity and multiply to one. For `tau = 0` the weighted sum is
/// empty and no `eps` is needed.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovConstants {
    pub gamma: f64,
    pub lipschitz: f64,
    pub tau: usize,
    /// `1/gamma` (convex regularizer) or `1/(2 gamma)` (nonconvex).
    pub rho: f64,
    /// Root `>= 1`; `None` when `tau = 0`.
    pub epsilon: Option<f64>,
    /// The other root (`< 1`), recorded for reference.
    pub epsilon_alt: Option<f64>,
    /// `(rho - L/2 - tau L) / 2`, the noise-splitting weight of the basic
    /// descent inequality.
    pub delta_descent: f64,
    /// `(rho - L/2 - tau L) / (4 tau)`, the weight used by the rate
    /// analysis; defined for `tau >= 1`.
    pub delta_rate: Option<f64>,
    /// `kappa = L/(2 eps) + delta_rate`, the weight of the modified
    /// Lyapunov function; defined for `tau >= 1`.
    pub kappa: Option<f64>,
    /// Guaranteed per-step descent factor `(rho - L/2 - tau L) / 4`:
    /// `xi_k - xi_{k+1} >= descent_constant * ||Delta^k||^2`.
    pub descent_constant: f64,
}

fn solve_with_rho(gamma: f64, lipschitz: f64, tau: usize, rho: f64) -> Result<LyapunovConstants> {
    if !(gamma > 0.0) || !(lipschitz > 0.0) {
        return Err(Error::invalid(
            "step size and Lipschitz constant must be > 0",
        ));
    }
    let l = lipschitz;
    let margin = rho - l / 2.0 - tau as f64 * l;
    if margin <= 0.0 {
        return Err(Error::invalid(format!(
            "step size {gamma} too large: need rho > (tau + 1/2) L, got rho = {rho}, L = {l}, tau = {tau}"
        )));
    }
    let delta_descent = margin / 2.0;
    let descent_constant = margin / 4.0;
    if tau == 0 {
        return Ok(LyapunovConstants {
            gamma,
            lipschitz,
            tau,
            rho,
            epsilon: None,
            epsilon_alt: None,
            delta_descent,
            delta_rate: None,
            kappa: None,
            descent_constant,
        });
    }
    let s = 1.0 + (rho / l - 0.5) / tau as f64;
    debug_assert!(s > 2.0);
    let disc = (s * s - 4.0).sqrt();
    let epsilon = (s + disc) / 2.0;
    let epsilon_alt = (s - disc) / 2.0;
    let delta_rate = margin / (4.0 * tau as f64);
    let kappa = l / (2.0 * epsilon) + delta_rate;
    Ok(LyapunovConstants {
        gamma,
        lipschitz,
        tau,
        rho,
        epsilon: Some(epsilon),
        epsilon_alt: Some(epsilon_alt),
        delta_descent,
        delta_rate: Some(delta_rate),
        kappa: Some(kappa),
        descent_constant,
    })
}

/// Constants for a convex regularizer with `gamma < 2 / ((2 tau + 1) L)`.
pub fn solve_constants(gamma: f64, lipschitz: f64, tau: usize) -> Result<LyapunovConstants> {
    solve_with_rho(gamma, lipschitz, tau, 1.0 / gamma)
}

/// Constants for a nonconvex regularizer with `gamma < 1 / ((2 tau + 1) L)`;
/// the effective inverse step is `1/(2 gamma)`.
pub fn solve_constants_nonconvex(
    gamma: f64,
    lipschitz: f64,
    tau: usize,
) -> Result<LyapunovConstants> {
    solve_with_rho(gamma, lipschitz, tau, 1.0 / (2.0 * gamma))
}

/// Constants for the line-search iteration (noise-free analysis).
///
/// `eps` solves `eps + 1/eps = 1 + ((2 tau + 1)/(2c) - 1/2)/tau` and the
/// modified weight is `kappa = L/(2 eps) + (1-c)/(8 c tau) * (L + 2 tau L)`.
/// Every step descends by at least `(1-c)/(4c) * (L + 2 tau L) * ||Delta^k||^2`
/// provided `c2 >= (2 tau + 1) L / c`.
#[derive(Debug, Clone, Copy)]
pub struct LineSearchConstants {
    pub c: f64,
    pub lipschitz: f64,
    pub tau: usize,
    pub epsilon: Option<f64>,
    pub kappa_tilde: Option<f64>,
    pub descent_constant: f64,
}

pub fn linesearch_constants(c: f64, lipschitz: f64, tau: usize) -> Result<LineSearchConstants> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid("line-search c must lie in (0,1)"));
    }
    let l = lipschitz;
    let descent_constant = (1.0 - c) / (4.0 * c) * (l + 2.0 * tau as f64 * l);
    if tau == 0 {
        return Ok(LineSearchConstants {
            c,
            lipschitz,
            tau,
            epsilon: None,
            kappa_tilde: None,
            descent_constant,
        });
    }
    let s = 1.0 + ((2.0 * tau as f64 + 1.0) / (2.0 * c) - 0.5) / tau as f64;
    let disc = (s * s - 4.0).sqrt();
    let epsilon = (s + disc) / 2.0;
    let kappa_tilde =
        l / (2.0 * epsilon) + (1.0 - c) / (8.0 * c * tau as f64) * (l + 2.0 * tau as f64 * l);
    Ok(LineSearchConstants {
        c,
        lipschitz,
        tau,
        epsilon: Some(epsilon),
        kappa_tilde: Some(kappa_tilde),
        descent_constant,
    })
}

/// `xi_k` without the `- min F` shift; usable when `F*` is unknown because
/// per-step differences are shift-invariant.
pub fn lyapunov_basic_shiftfree(
    f_at_x: f64,
    history: &DeltaHistory,
    constants: &LyapunovConstants,
    tail_sq: f64,
) -> f64 {
    let weight_term = match constants.epsilon {
        Some(eps) => constants.lipschitz / (2.0 * eps) * history.weighted_sum_sq(),
        None => 0.0,
    };
    f_at_x + weight_term + tail_sq / (2.0 * constants.delta_descent)
}

/// The basic Lyapunov value `xi_k`; errors when `F*` has not been supplied
/// (run the reference solver to obtain it).
pub fn lyapunov_basic(
    f_at_x: f64,
    history: &DeltaHistory,
    constants: &LyapunovConstants,
    tail_sq: f64,
    f_star: Option<f64>,
) -> Result<f64> {
    let fs = f_star.ok_or(Error::UnknownFStar)?;
    Ok(lyapunov_basic_shiftfree(f_at_x, history, constants, tail_sq) - fs)
}

/// Auxiliary sequence `phi_k` dominating the noise in the rate analysis:
/// `sigma_k / sqrt(2) <= phi_k` and `sum_{i>=k} phi_i^2 <= D phi_k^2`.
#[derive(Debug, Clone, Copy)]
pub struct PhiSchedule {
    pub phi0: f64,
    pub zeta: f64,
    /// Tail-domination constant `D`; `1/(1 - zeta^2)` for geometric decay.
    pub d_cap: f64,
}

impl PhiSchedule {
    /// Derives the minimal admissible schedule for a noise model. Power-law
    /// noise admits no geometric domination with finite `D`, so it is
    /// rejected.
    pub fn for_noise(noise: &NoiseSchedule) -> Result<PhiSchedule> {
        match noise.kind {
            NoiseKind::None => Ok(PhiSchedule {
                phi0: 0.0,
                zeta: 0.5,
                d_cap: 1.0 / (1.0 - 0.25),
            }),
            NoiseKind::Geometric { amplitude, zeta } => Ok(PhiSchedule {
                phi0: amplitude / std::f64::consts::SQRT_2,
                zeta,
                d_cap: 1.0 / (1.0 - zeta * zeta),
            }),
            NoiseKind::Power { .. } => Err(Error::invalid(
                "power-law noise admits no geometrically dominated phi schedule",
            )),
        }
    }

    /// Validates the domination preconditions against a noise schedule.
    pub fn validate_against(&self, noise: &NoiseSchedule, horizon: u64) -> Result<()> {
        for k in 0..=horizon.min(64) {
            let sigma = noise.sigma(k);
            let phi = self.phi(k);
            if sigma / std::f64::consts::SQRT_2 > phi * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "phi schedule fails sigma_k/sqrt(2) <= phi_k at k = {k}"
                )));
            }
        }
        let implied_d = 1.0 / (1.0 - self.zeta * self.zeta);
        if implied_d > self.d_cap * (1.0 + 1e-12) {
            return Err(Error::invalid("phi tail-domination constant D too small"));
        }
        Ok(())
    }

    pub fn phi(&self, k: u64) -> f64 {
        self.phi0 * self.zeta.powi(k as i32)
    }

    /// `sum_{i>=k} phi_i^2`, closed form.
    pub fn tail_sq(&self, k: u64) -> f64 {
        let z2 = self.zeta * self.zeta;
        self.phi0 * self.phi0 * z2.powi(k as i32) / (1.0 - z2)
    }
}

/// The modified Lyapunov value `F_k` with the `kappa` weight and
/// `lambda_k = tail_sq/(2 delta_rate) + phi_tail`. Requires `tau >= 1`.
pub fn lyapunov_kappa_shiftfree(
    f_at_x: f64,
    history: &DeltaHistory,
    constants: &LyapunovConstants,
    tail_sq: f64,
    phi_tail: f64,
) -> Result<f64> {
    let (kappa, delta_rate) = match (constants.kappa, constants.delta_rate) {
        (Some(k), Some(d)) => (k, d),
        _ => return Err(Error::invalid("kappa-weighted Lyapunov needs tau >= 1")),
    };
    Ok(f_at_x + kappa * history.weighted_sum_sq() + tail_sq / (2.0 * delta_rate) + phi_tail)
}

pub fn lyapunov_kappa(
    f_at_x: f64,
    history: &DeltaHistory,
    constants: &LyapunovConstants,
    tail_sq: f64,
    phi_tail: f64,
    f_star: Option<f64>,
) -> Result<f64> {
    let fs = f_star.ok_or(Error::UnknownFStar)?;
    Ok(lyapunov_kappa_shiftfree(f_at_x, history, constants, tail_sq, phi_tail)? - fs)
}

/// Line-search Lyapunov pair `(xi_k, F_k)`, valid on noise-free runs only.
pub fn lyapunov_linesearch(
    f_at_x: f64,
    history: &DeltaHistory,
    constants: &LineSearchConstants,
    noise: &NoiseSchedule,
    f_star: Option<f64>,
) -> Result<(f64, Option<f64>)> {
    if !noise.is_none() {
        return Err(Error::invalid(
            "line-search Lyapunov functions are defined for noise-free runs",
        ));
    }
    let fs = f_star.ok_or(Error::UnknownFStar)?;
    let w = history.weighted_sum_sq();
    let xi = match constants.epsilon {
        Some(eps) => f_at_x + constants.lipschitz / (2.0 * eps) * w - fs,
        None => f_at_x - fs,
    };
    let fk = constants.kappa_tilde.map(|kt| f_at_x + kt * w - fs);
    Ok((xi, fk))
}

/// The certified subgradient residual
/// `r^{k+1} = (x^k - x^{k+1})/gamma + grad f(x^{k+1}) - v^k`,
/// a member of the subdifferential of `F` at `x^{k+1}` whose norm bounds
/// `dist(0, dF(x^{k+1}))`.
pub fn residual(
    problem: &CompositeProblem,
    x_k: &[f64],
    x_next: &[f64],
    v_k: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("residual needs gamma > 0"));
    }
    let grad_next = problem.full_gradient(x_next)?;
    let mut r = vec![0.0; x_k.len()];
    for j in 0..r.len() {
        r[j] = (x_k[j] - x_next[j]) / gamma + grad_next[j] - v_k[j];
    }
    Ok(r)
}

/// Upper bound on the residual norm from the staleness window:
/// `||Delta^k||/gamma + L * sum_{d=k-tau}^{k} ||Delta^d|| + sigma_k`.
pub fn residual_bound(
    delta_norm: f64,
    history_sum_norms: f64,
    gamma: f64,
    lipschitz: f64,
    sigma: f64,
) -> f64 {
    delta_norm / gamma + lipschitz * (history_sum_norms + delta_norm) + sigma
}

/// Sublinear statistics of `k * (F(x^k) - F*)` plus an optional log-linear
/// fit of the gap, the empirical counterparts of the O(1/k) and O(omega^k)
/// rate guarantees.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub f_star: f64,
    pub sublinear: SublinearReport,
    pub linear: Option<LinearFit>,
}

#[derive(Debug, Clone)]
pub struct SublinearReport {
    /// `sup k (F - F*)` over the first half of the run.
    pub sup_head: f64,
    /// `sup k (F - F*)` over the last half of the run.
    pub sup_tail: f64,
    /// Least-squares slope of `k (F - F*)` against `k` over the last half.
    pub trend_slope: f64,
    pub tail_points: usize,
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    /// Per-iteration contraction factor fitted on `ln(F - F*)`.
    pub omega: f64,
    /// Coefficient of determination of the fit.
    pub r2: f64,
    pub points: usize,
    pub window: (f64, f64),
}

/// Window of gap values a linear fit uses.
pub const LINEAR_FIT_WINDOW: (f64, f64) = (1e-12, 1e-2);

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..xs.len() {
        let pred = intercept + slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - my) * (ys[i] - my);
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Fits rate statistics from per-iteration objective values.
///
/// `f_star` must come from a trusted reference run; if any observed value
/// undershoots it beyond rounding slack the reference is inconsistent.
pub fn fit_rates(ks: &[u64], fs: &[f64], f_star: f64) -> Result<RateReport> {
    if ks.len() != fs.len() || ks.len() < 4 {
        return Err(Error::invalid("rate fit needs at least 4 trace points"));
    }
    let slack = 1e-12 * (1.0 + f_star.abs());
    for &f in fs {
        if f < f_star - slack {
            return Err(Error::InconsistentReference {
                f_star,
                observed: f,
            });
        }
    }
    let k_last = *ks.last().unwrap();
    let half = k_last / 2;
    let mut sup_head = f64::NEG_INFINITY;
    let mut sup_tail = f64::NEG_INFINITY;
    let mut tail_k = Vec::new();
    let mut tail_s = Vec::new();
    for (&k, &f) in ks.iter().zip(fs) {
        let s = k as f64 * (f - f_star);
        if k <= half {
            sup_head = sup_head.max(s);
        } else {
            sup_tail = sup_tail.max(s);
            tail_k.push(k as f64);
            tail_s.push(s);
        }
    }
    let (trend_slope, _, _) = if tail_k.len() >= 2 {
        least_squares_slope(&tail_k, &tail_s)
    } else {
        (0.0, 0.0, 1.0)
    };
    let sublinear = SublinearReport {
        sup_head,
        sup_tail,
        trend_slope,
        tail_points: tail_k.len(),
    };

    let mut win_k = Vec::new();
    let mut win_lg = Vec::new();
    for (&k, &f) in ks.iter().zip(fs) {
        let gap = f - f_star;
        if gap >= LINEAR_FIT_WINDOW.0 && gap <= LINEAR_FIT_WINDOW.1 {
            win_k.push(k as f64);
            win_lg.push(gap.ln());
        }
    }
    let linear = if win_k.len() >= 10 {
        let (slope, _, r2) = least_squares_slope(&win_k, &win_lg);
        Some(LinearFit {
            omega: slope.exp(),
            r2,
            points: win_k.len(),
            window: LINEAR_FIT_WINDOW,
        })
    } else {
        None
    };

    Ok(RateReport {
        f_star,
        sublinear,
        linear,
    })
}

/// The constants of the chained rate inequality
/// `(F_{k+1})^2 <= alpha (F_k - F_{k+1}) (kappa tau sum ||Delta^d||^2
///   + beta ||x^{k+1} - xbar^{k+1}||^2 + lambda_k)`.
///
/// Two `alpha` variants are kept, differing in where `L` enters the
/// denominator: `alpha_margin` divides the numerator by
/// `min{(1/8tau)(1/gamma - L/2 - tau L), 1}` — half the `delta_rate`
/// margin, positive whenever the step-size bound holds — while
/// `alpha_scaled` divides by `min{(L/8tau)(1/gamma - 1/2 - tau), 1}`, an
/// L-scaled form of the same quantity that needs `L > c` to stay positive.
#[derive(Debug, Clone, Copy)]
pub struct ChainConstants {
    pub alpha_scaled: f64,
    pub alpha_margin: f64,
    pub beta: f64,
}

pub fn chain_constants(constants: &LyapunovConstants, d_cap: f64) -> Result<ChainConstants> {
    let kappa = constants
        .kappa
        .ok_or_else(|| Error::invalid("chain constants need tau >= 1"))?;
    let l = constants.lipschitz;
    let tau = constants.tau as f64;
    let inv_gamma = 1.0 / constants.gamma;
    let numerator = (inv_gamma + l + kappa * tau).max(2.0 * d_cap);
    let scaled_denom = (l / (8.0 * tau) * (inv_gamma - 0.5 - tau)).min(1.0);
    let margin_denom = (1.0 / (8.0 * tau) * (inv_gamma - l / 2.0 - tau * l)).min(1.0);
    let beta = (tau + 1.0) * (inv_gamma + l) + 1.0;
    Ok(ChainConstants {
        alpha_scaled: numerator / scaled_denom,
        alpha_margin: numerator / margin_denom,
        beta,
    })
}

/// Distance to a reference minimizer, for chained-inequality checks on toy
/// problems with a unique minimum.
pub fn distance_to_reference(x: &[f64], x_ref: &[f64]) -> f64 {
    vecmath::dist(x, x_ref)
}
