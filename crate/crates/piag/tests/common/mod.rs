//! Shared helpers for the integration suites: independent oracles and
//! reproducible toy problems.

#![allow(dead_code)]

use piag::{
    logistic_component, quadratic_component, squared_logistic_component, CompositeProblem,
    LabeledSample, Regularizer, SmoothComponent, SparseRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Central finite differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..x.len() {
        let step = h * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        g[j] = (f(&xp) - f(&xm)) / (2.0 * step);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    g
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    (num.sqrt()) / den.sqrt().max(1e-12)
}

/// Max sampled gradient-difference ratio `||grad(x)-grad(y)|| / ||x-y||`,
/// the numerical certificate that the declared Lipschitz constant is an
/// upper bound.
pub fn sampled_lipschitz_ratio(
    comp: &dyn SmoothComponent,
    n: usize,
    pairs: usize,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> f64 {
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = random_vec(rng, n, scale);
        let y = random_vec(rng, n, scale);
        comp.grad_into(&x, &mut gx);
        comp.grad_into(&y, &mut gy);
        let mut dg = 0.0;
        let mut dx = 0.0;
        for j in 0..n {
            dg += (gx[j] - gy[j]) * (gx[j] - gy[j]);
            dx += (x[j] - y[j]) * (x[j] - y[j]);
        }
        if dx > 0.0 {
            worst = worst.max((dg / dx).sqrt());
        }
    }
    worst
}

pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, nnz: usize) -> LabeledSample {
    let mut idx: Vec<u32> = (0..n as u32).collect();
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let mut chosen: Vec<u32> = idx.into_iter().take(nnz).collect();
    chosen.sort_unstable();
    let vals: Vec<f64> = (0..nnz).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let row = SparseRow::new(chosen, vals, n).unwrap();
    let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    LabeledSample::new(row, label).unwrap()
}

/// Random sparse least-squares instance: m quadratic rows plus the supplied
/// regularizer.
pub fn lasso_toy(n: usize, m: usize, seed: u64, reg: Regularizer) -> CompositeProblem {
    let mut r = rng(seed);
    let nnz = (n / 2).max(1);
    let mut comps: Vec<Box<dyn SmoothComponent>> = Vec::new();
    for _ in 0..m {
        let s = random_sample(&mut r, n, nnz);
        let target = r.gen_range(-1.0..1.0);
        comps.push(Box::new(quadratic_component(s.row().clone(), target)));
    }
    CompositeProblem::new(comps, reg, n).unwrap()
}

/// Small binary classification instance with the requested loss.
pub fn classification_toy(
    n: usize,
    m: usize,
    seed: u64,
    squared: bool,
    reg: Regularizer,
) -> CompositeProblem {
    let mut r = rng(seed);
    let nnz = (n / 2).max(1);
    let mut comps: Vec<Box<dyn SmoothComponent>> = Vec::new();
    for _ in 0..m {
        let s = random_sample(&mut r, n, nnz);
        if squared {
            comps.push(Box::new(squared_logistic_component(s)));
        } else {
            comps.push(Box::new(logistic_component(s)));
        }
    }
    CompositeProblem::new(comps, reg, n).unwrap()
}
