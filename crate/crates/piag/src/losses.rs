//! Smooth loss components: logistic regression (convex), squared logistic
//! deviation (nonconvex), and least-squares rows, each with a certified
//! Lipschitz constant for its gradient.

use crate::error::{Error, Result};
use crate::problem::SmoothComponent;
use crate::vecmath::SparseRow;

/// One labeled row of a binary classification dataset.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    row: SparseRow,
    label: f64,
}

impl LabeledSample {
    pub fn new(row: SparseRow, label: f64) -> Result<Self> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::invalid(format!(
                "label must be exactly +1 or -1, got {label}"
            )));
        }
        Ok(LabeledSample { row, label })
    }

    pub fn row(&self) -> &SparseRow {
        &self.row
    }

    pub fn label(&self) -> f64 {
        self.label
    }
}

/// Numerically stable `ln(1 + e^t)`.
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Upper bound on `|d^2/dt^2 (sigma(t) - 1)^2|` over the real line.
///
/// With `s = sigma(t)` the second derivative is `2 s (1-s)^2 (3s - 1)`; its
/// extrema solve `-12 s^2 + 9 s - 1 = 0`, and the supremum of the absolute
/// value is attained at `s = (9 + sqrt(33))/24 ~= 0.6143568`, giving
/// `0.15405857012135051...`. The stored constant is that value rounded up in
/// the last digit so it remains a valid curvature bound.
pub const SQUARED_LOGISTIC_CURVATURE: f64 = 0.15405857012135052;

/// Logistic loss `f_i(x) = ln(1 + exp(-b <a, x>))` with `L_i = ||a||^2 / 4`.
pub struct Logistic {
    sample: LabeledSample,
    lipschitz: f64,
}

pub fn logistic_component(sample: LabeledSample) -> Logistic {
    let lipschitz = sample.row.norm_sq() / 4.0;
    Logistic { sample, lipschitz }
}

impl SmoothComponent for Logistic {
    fn value(&self, x: &[f64]) -> f64 {
        let t = self.sample.label * self.sample.row.dot(x);
        log1p_exp(-t)
    }

    fn grad_accumulate(&self, x: &[f64], out: &mut [f64]) {
        let t = self.sample.label * self.sample.row.dot(x);
        let coef = -self.sample.label * sigmoid(-t);
        self.sample.row.add_scaled(coef, out);
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Squared logistic deviation `f_i(x) = (sigma(b <a, x>) - 1)^2`, a smooth
/// nonconvex classification loss, with `L_i = SQUARED_LOGISTIC_CURVATURE * ||a||^2`.
pub struct SquaredLogistic {
    sample: LabeledSample,
    lipschitz: f64,
}

pub fn squared_logistic_component(sample: LabeledSample) -> SquaredLogistic {
    let lipschitz = SQUARED_LOGISTIC_CURVATURE * sample.row.norm_sq();
    SquaredLogistic { sample, lipschitz }
}

impl SmoothComponent for SquaredLogistic {
    fn value(&self, x: &[f64]) -> f64 {
        // (sigma(t) - 1)^2 == sigma(-t)^2, overflow-free in both tails
        let t = self.sample.label * self.sample.row.dot(x);
        let q = sigmoid(-t);
        q * q
    }

    fn grad_accumulate(&self, x: &[f64], out: &mut [f64]) {
        let t = self.sample.label * self.sample.row.dot(x);
        let s = sigmoid(t);
        let q = sigmoid(-t);
        let coef = -2.0 * s * q * q * self.sample.label;
        self.sample.row.add_scaled(coef, out);
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Least-squares row `f_i(x) = (<a, x> - b)^2` with `L_i = 2 ||a||^2`.
pub struct QuadraticComponent {
    row: SparseRow,
    target: f64,
    lipschitz: f64,
}

pub fn quadratic_component(row: SparseRow, target: f64) -> QuadraticComponent {
    let lipschitz = 2.0 * row.norm_sq();
    QuadraticComponent {
        row,
        target,
        lipschitz,
    }
}

impl QuadraticComponent {
    pub fn row(&self) -> &SparseRow {
        &self.row
    }

    pub fn target(&self) -> f64 {
        self.target
    }
}

impl SmoothComponent for QuadraticComponent {
    fn value(&self, x: &[f64]) -> f64 {
        let r = self.row.dot(x) - self.target;
        r * r
    }

    fn grad_accumulate(&self, x: &[f64], out: &mut [f64]) {
        let coef = 2.0 * (self.row.dot(x) - self.target);
        self.row.add_scaled(coef, out);
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}
