//! Reproducible synthetic problem instances: sparse least squares, a
//! rank-deficient variant that is restricted-strongly-convex without being
//! strongly convex, and a well-conditioned binary classification generator.

use piag::{LabeledSample, SparseRow};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct LeastSquaresInstance {
    pub rows: Vec<SparseRow>,
    pub targets: Vec<f64>,
    /// `||b||^2`, the default radius of the box-augmented l1 regularizer.
    pub b_norm_sq: f64,
}

/// Sparse least-squares rows with a planted sparse solution plus small
/// target noise.
pub fn make_lasso(n: usize, m: usize, seed: u64, sparsity: f64) -> LeastSquaresInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nnz = ((sparsity * n as f64).round() as usize).clamp(1, n);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.shuffle(&mut rng);
        let mut chosen: Vec<u32> = idx.into_iter().take(nnz).collect();
        chosen.sort_unstable();
        let vals: Vec<f64> = (0..nnz).map(|_| rng.sample(StandardNormal)).collect();
        rows.push(SparseRow::new(chosen, vals, n).unwrap());
    }
    let mut x_true = vec![0.0; n];
    let support = (n / 10).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    for &j in idx.iter().take(support) {
        x_true[j] = rng.sample::<f64, _>(StandardNormal);
    }
    let mut targets = Vec::with_capacity(m);
    let mut b_norm_sq = 0.0;
    for row in &rows {
        let noise: f64 = rng.sample(StandardNormal);
        let b = row.dot(&x_true) + 0.1 * noise;
        b_norm_sq += b * b;
        targets.push(b);
    }
    LeastSquaresInstance {
        rows,
        targets,
        b_norm_sq,
    }
}

/// Least squares with `A = U V^T`, `U` and `V` orthonormal of the given
/// rank: every nonzero singular value equals one, so the Hessian `2 A^T A`
/// has eigenvalue 2 on the row space and exactly `n - rank` zero eigenvalues.
/// With an l1 term the objective satisfies a restricted-strong-convexity
/// bound but is not strongly convex.
pub fn make_restricted_sc(n: usize, m: usize, rank: usize, seed: u64) -> LeastSquaresInstance {
    assert!(
        rank >= 1 && rank <= n.min(m),
        "rank must lie in [1, min(n,m)]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = orthonormal_columns(m, rank, &mut rng);
    let v = orthonormal_columns(n, rank, &mut rng);
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut dense = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for r in 0..rank {
                acc += u[r][i] * v[r][j];
            }
            dense[j] = acc;
        }
        rows.push(SparseRow::from_dense(&dense));
    }
    let mut x_true = vec![0.0; n];
    let planted = (n / 3).max(1);
    for j in 0..planted {
        x_true[j] = 1.0 - 0.5 * j as f64 / planted as f64;
    }
    let mut targets = Vec::with_capacity(m);
    let mut b_norm_sq = 0.0;
    for row in &rows {
        let noise: f64 = rng.sample(StandardNormal);
        let b = row.dot(&x_true) + 0.05 * noise;
        b_norm_sq += b * b;
        targets.push(b);
    }
    LeastSquaresInstance {
        rows,
        targets,
        b_norm_sq,
    }
}

/// Modified Gram-Schmidt orthonormalization of `count` gaussian columns of
/// length `len`; returned column-major.
fn orthonormal_columns(len: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(count);
    while cols.len() < count {
        let mut col: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for prev in &cols {
            let proj: f64 = col.iter().zip(prev).map(|(a, b)| a * b).sum();
            for j in 0..len {
                col[j] -= proj * prev[j];
            }
        }
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for v in col.iter_mut() {
            *v /= norm;
        }
        cols.push(col);
    }
    cols
}

/// Binary classification rows built around rotating dominant coordinates
/// with light random coupling, scaled to a common row norm. The label-noise
/// fraction places the per-coordinate optima in the high-curvature region of
/// the link function, which keeps the instances well conditioned at desk
/// scale.
pub fn make_classification(n: usize, m: usize, seed: u64, label_noise: f64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_norm = 2.0;
    let extras = 2.min(n.saturating_sub(1));
    let mut samples = Vec::with_capacity(m);
    let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    for i in 0..m {
        let mut dense = vec![0.0; n];
        dense[i % n] = 1.0;
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        for &j in pool.iter().take(extras) {
            let bump: f64 = rng.sample(StandardNormal);
            dense[j] += 0.25 * bump;
        }
        let norm: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in dense.iter_mut() {
            *v *= row_norm / norm;
        }
        let margin: f64 = dense.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < label_noise {
            label = -label;
        }
        samples.push(LabeledSample::new(SparseRow::from_dense(&dense), label).unwrap());
    }
    samples
}

/// Writes samples in LIBSVM text format (1-based indices).
pub fn write_libsvm(path: &Path, samples: &[LabeledSample]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        let label = if s.label() > 0.0 { "+1" } else { "-1" };
        write!(out, "{label}")?;
        for (&i, &v) in s.row().indices().iter().zip(s.row().values()) {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()
}
