//! The composite problem `F = sum_i f_i + g` and the iterate bookkeeping
//! shared by every solver variant.

use crate::error::{Error, Result};
use crate::prox::Regularizer;

/// A smooth component `f_i` with an `L_i`-Lipschitz gradient.
///
/// Components are immutable after construction and safe to evaluate from
/// multiple threads. `grad_accumulate` adds the gradient into `out`; the
/// aggregated full gradient is always accumulated in ascending component
/// order so results are bit-reproducible.
pub trait SmoothComponent: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// `out += grad f_i(x)`
    fn grad_accumulate(&self, x: &[f64], out: &mut [f64]);

    /// A certified Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;

    /// `out = grad f_i(x)`
    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.grad_accumulate(x, out);
    }
}

/// The problem data: `m` smooth components plus a proximable regularizer.
pub struct CompositeProblem {
    components: Vec<Box<dyn SmoothComponent>>,
    regularizer: Regularizer,
    dim: usize,
    lipschitz_per: Vec<f64>,
    lipschitz_total: f64,
}

impl CompositeProblem {
    pub fn new(
        components: Vec<Box<dyn SmoothComponent>>,
        regularizer: Regularizer,
        dim: usize,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(
                "a composite problem needs m >= 1 components",
            ));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        regularizer.validate()?;
        let lipschitz_per: Vec<f64> = components.iter().map(|c| c.lipschitz()).collect();
        for (i, &l) in lipschitz_per.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!(
                    "component {i} has non-positive Lipschitz constant {l}"
                )));
            }
        }
        let lipschitz_total = lipschitz_per.iter().sum();
        Ok(CompositeProblem {
            components,
            regularizer,
            dim,
            lipschitz_per,
            lipschitz_total,
        })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn lipschitz_total(&self) -> f64 {
        self.lipschitz_total
    }

    pub fn lipschitz_per_component(&self) -> &[f64] {
        &self.lipschitz_per
    }

    pub fn component(&self, i: usize) -> &dyn SmoothComponent {
        self.components[i].as_ref()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x) = sum_i f_i(x)`, summed in ascending component order.
    pub fn smooth_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.value(x);
        }
        Ok(acc)
    }

    /// `F(x) = f(x) + g(x)`
    pub fn full_objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.smooth_value(x)? + self.regularizer.value(x))
    }

    /// `grad f(x) = sum_i grad f_i(x)`, accumulated in ascending component
    /// order (fixed reduction order, no pairwise/tree summation).
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim];
        for c in &self.components {
            c.grad_accumulate(x, &mut out);
        }
        Ok(out)
    }
}

/// Ring buffer of the most recent step-difference norms
/// `||Delta^d|| = ||x^{d+1} - x^d||`, holding at most `tau` entries
/// (entries for `d < 0` are zero by convention and never stored).
#[derive(Debug, Clone)]
pub struct DeltaHistory {
    cap: usize,
    buf: std::collections::VecDeque<f64>,
}

impl DeltaHistory {
    pub fn new(cap: usize) -> Self {
        DeltaHistory {
            cap,
            buf: std::collections::VecDeque::with_capacity(cap),
        }
    }

    pub fn push(&mut self, delta_norm: f64) {
        if self.cap == 0 {
            return;
        }
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(delta_norm);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    /// Oldest-to-newest iteration over the stored norms, i.e.
    /// `d = k - len .. k - 1` when the solver sits at iterate `k`.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }

    /// The delay-weighted sum `sum_{d=k-tau}^{k-1} (d-(k-tau)+1) ||Delta^d||^2`:
    /// the newest entry carries weight `tau`, the entry `tau` steps back
    /// weight 1. Missing entries (d < 0 early on) contribute zero.
    pub fn weighted_sum_sq(&self) -> f64 {
        let len = self.buf.len();
        let mut acc = 0.0;
        for (i, &v) in self.buf.iter().enumerate() {
            let weight = (self.cap - len + 1 + i) as f64;
            acc += weight * v * v;
        }
        acc
    }

    pub fn sum_sq(&self) -> f64 {
        self.buf.iter().map(|v| v * v).sum()
    }

    pub fn sum_norms(&self) -> f64 {
        self.buf.iter().sum()
    }
}
