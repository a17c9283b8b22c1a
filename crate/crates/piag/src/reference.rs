//! High-accuracy reference solutions via plain proximal gradient descent.
//!
//! `F*` for gap columns and rate fits comes from here: a zero-delay,
//! noise-free run with a conservative step, iterated until the subgradient
//! residual drops below tolerance or the iterates stop changing bitwise.

use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::prox::Regularizer;

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub f_star: f64,
    pub iterations: u64,
    pub residual: f64,
    /// True when the run ended at an exact fixed point of the prox step.
    pub fixed_point: bool,
}

/// Runs proximal gradient descent with `gamma = 1/L` (convex regularizer) or
/// `gamma = 1/(2L)` (nonconvex; for MCP the step also stays below `theta`).
/// Stops on a bitwise fixed point, on `residual < tol`, or at `max_iter`.
pub fn reference_prox_grad(
    problem: &CompositeProblem,
    tol: f64,
    max_iter: u64,
) -> Result<ReferenceSolution> {
    let n = problem.dim();
    let l = problem.lipschitz_total();
    let mut gamma = if problem.regularizer().convex() {
        1.0 / l
    } else {
        1.0 / (2.0 * l)
    };
    if let Regularizer::Mcp { theta, .. } = problem.regularizer() {
        gamma = gamma.min(theta / 2.0);
    }

    let mut x = vec![0.0; n];
    let mut grad = problem.full_gradient(&x)?;
    let mut z = vec![0.0; n];
    let mut x_next = vec![0.0; n];
    let mut iterations = 0u64;
    let mut residual = f64::INFINITY;
    let mut fixed_point = false;

    while iterations < max_iter {
        for j in 0..n {
            z[j] = x[j] - gamma * grad[j];
        }
        problem.regularizer().prox_into(&z, gamma, &mut x_next)?;
        iterations += 1;

        if x_next == x {
            fixed_point = true;
            residual = 0.0;
            break;
        }
        let grad_next = problem.full_gradient(&x_next)?;
        // r = (x - x_next)/gamma + grad(x_next) - grad(x)
        let mut r_sq = 0.0;
        for j in 0..n {
            let r = (x[j] - x_next[j]) / gamma + grad_next[j] - grad[j];
            r_sq += r * r;
        }
        residual = r_sq.sqrt();
        std::mem::swap(&mut x, &mut x_next);
        grad = grad_next;
        if residual < tol {
            break;
        }
    }

    let f_star = problem.full_objective(&x)?;
    Ok(ReferenceSolution {
        x,
        f_star,
        iterations,
        residual,
        fixed_point,
    })
}
