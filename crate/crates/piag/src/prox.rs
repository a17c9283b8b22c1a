//! Proximal maps for the supported regularizers: zero, l1, l1 plus a box
//! indicator, and the minimax concave penalty (MCP).
//!
//! All maps are separable and evaluated componentwise in closed form:
//! `prox_{gamma g}(z) = argmin_y 1/2 ||z - y||^2 + gamma g(y)`.

use crate::error::{Error, Result};

/// The regularizer `g`. `convex()` is true for every kind except MCP.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 {
        weight: f64,
    },
    /// `weight * ||x||_1` plus the indicator of the box `[-radius, radius]^n`.
    /// The prox decomposes as clip(soft_threshold(z)).
    L1Box {
        weight: f64,
        radius: f64,
    },
    /// Minimax concave penalty: `g(y) = sum_j rho(y_j)` with
    /// `rho(t) = weight |t| - t^2/(2 theta)` for `|t| <= theta * weight` and
    /// `rho(t) = theta weight^2 / 2` beyond. The prox step must satisfy
    /// `gamma < theta` so each scalar subproblem stays strongly convex.
    Mcp {
        weight: f64,
        theta: f64,
    },
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn clip(z: f64, r: f64) -> f64 {
    z.clamp(-r, r)
}

impl Regularizer {
    pub fn convex(&self) -> bool {
        !matches!(self, Regularizer::Mcp { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { weight } => {
                if weight < 0.0 {
                    Err(Error::invalid("l1 weight must be >= 0"))
                } else {
                    Ok(())
                }
            }
            Regularizer::L1Box { weight, radius } => {
                if weight < 0.0 {
                    Err(Error::invalid("l1_box weight must be >= 0"))
                } else if !(radius > 0.0) {
                    Err(Error::invalid("l1_box radius must be > 0"))
                } else {
                    Ok(())
                }
            }
            Regularizer::Mcp { weight, theta } => {
                if weight < 0.0 {
                    Err(Error::invalid("mcp weight must be >= 0"))
                } else if !(theta > 1.0) {
                    Err(Error::invalid("mcp theta must be > 1"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Scalar penalty value.
    pub fn value_scalar(&self, t: f64) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * t.abs(),
            Regularizer::L1Box { weight, radius } => {
                if t.abs() > radius {
                    f64::INFINITY
                } else {
                    weight * t.abs()
                }
            }
            Regularizer::Mcp { weight, theta } => {
                let a = t.abs();
                if a <= theta * weight {
                    weight * a - t * t / (2.0 * theta)
                } else {
                    theta * weight * weight / 2.0
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            _ => x.iter().map(|&t| self.value_scalar(t)).sum(),
        }
    }

    /// Scalar prox. For MCP the candidate stationary points are compared and
    /// ties break toward the smaller absolute value, which the branch order
    /// below encodes (the zero branch wins at `|z| = gamma * weight`, the
    /// shrunk branch at `|z| = theta * weight`).
    pub fn prox_scalar(&self, z: f64, gamma: f64) -> f64 {
        match *self {
            Regularizer::Zero => z,
            Regularizer::L1 { weight } => soft_threshold(z, gamma * weight),
            Regularizer::L1Box { weight, radius } => {
                clip(soft_threshold(z, gamma * weight), radius)
            }
            Regularizer::Mcp { weight, theta } => {
                let t = gamma * weight;
                let a = z.abs();
                if a <= t {
                    0.0
                } else if a <= theta * weight {
                    z.signum() * (a - t) / (1.0 - gamma / theta)
                } else {
                    z
                }
            }
        }
    }

    fn check_step(&self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!(
                "prox step must be > 0, got {gamma}"
            )));
        }
        if let Regularizer::Mcp { theta, .. } = *self {
            if gamma >= theta {
                return Err(Error::invalid(format!(
                    "mcp prox needs step {gamma} < theta {theta}"
                )));
            }
        }
        Ok(())
    }

    pub fn prox_into(&self, z: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        self.check_step(gamma)?;
        debug_assert_eq!(z.len(), out.len());
        for i in 0..z.len() {
            out[i] = self.prox_scalar(z[i], gamma);
        }
        Ok(())
    }

    pub fn prox(&self, z: &[f64], gamma: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; z.len()];
        self.prox_into(z, gamma, &mut out)?;
        Ok(out)
    }
}

/// Checks, componentwise and with exact equality, that the l1+box prox equals
/// the composition box-projection after soft-thresholding.
pub fn prox_l1_box_decomposition_check(z: &[f64], weight: f64, radius: f64, gamma: f64) -> bool {
    let reg = Regularizer::L1Box { weight, radius };
    z.iter().all(|&zi| {
        let composed = clip(soft_threshold(zi, gamma * weight), radius);
        composed == reg.prox_scalar(zi, gamma)
    })
}
