//! The delayed-gradient state: per-component stored gradients `w_i`, their
//! refresh steps, a running aggregate `sum_i w_i`, and the optional snapshot
//! used by the variance-reduced scheme.

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::schedule::LagThreshold;
use crate::vecmath;

/// Snapshot state for scheme II: an anchor point and its full gradient, both
/// refreshed once per sweep.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub step: u64,
}

pub struct GradientTable {
    m: usize,
    n: usize,
    stored: Vec<Vec<f64>>,
    last_refresh: Vec<u64>,
    aggregate: Vec<f64>,
    snapshot: Option<Snapshot>,
    /// Iterates at each component's last refresh; allocated only when a
    /// movement-scaled lazy trigger needs them.
    refresh_points: Option<Vec<Vec<f64>>>,
    warm: bool,
    commits_since_recompute: usize,
    scratch: Vec<f64>,
}

impl GradientTable {
    pub fn new(m: usize, n: usize, track_refresh_points: bool) -> Self {
        GradientTable {
            m,
            n,
            stored: vec![vec![0.0; n]; m],
            last_refresh: vec![0; m],
            aggregate: vec![0.0; n],
            snapshot: None,
            refresh_points: if track_refresh_points {
                Some(vec![vec![0.0; n]; m])
            } else {
                None
            },
            warm: false,
            commits_since_recompute: 0,
            scratch: vec![0.0; n],
        }
    }

    /// Fills the table with `w_i = grad f_i(x0)`, all ages zero, exact
    /// aggregate, and a snapshot anchored at `x0`.
    pub fn warm_start(&mut self, problem: &CompositeProblem, x0: &[f64]) -> Result<()> {
        if x0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x0.len(),
            });
        }
        for i in 0..self.m {
            problem.component(i).grad_into(x0, &mut self.stored[i]);
            self.last_refresh[i] = 0;
            if let Some(points) = self.refresh_points.as_mut() {
                points[i].copy_from_slice(x0);
            }
        }
        self.recompute_aggregate();
        self.snapshot = Some(Snapshot {
            x: x0.to_vec(),
            grad: self.aggregate.clone(),
            step: 0,
        });
        self.warm = true;
        self.commits_since_recompute = 0;
        Ok(())
    }

    pub fn is_warm(&self) -> bool {
        self.warm
    }

    pub fn num_components(&self) -> usize {
        self.m
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn stored(&self, i: usize) -> &[f64] {
        &self.stored[i]
    }

    pub fn last_refresh(&self, i: usize) -> u64 {
        self.last_refresh[i]
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    /// Age of component `i`'s stored gradient at step `k`.
    pub fn age(&self, i: usize, k: u64) -> u64 {
        k - self.last_refresh[i]
    }

    pub fn ages(&self, k: u64) -> Vec<u64> {
        (0..self.m).map(|i| self.age(i, k)).collect()
    }

    pub fn max_age(&self, k: u64) -> u64 {
        (0..self.m).map(|i| self.age(i, k)).max().unwrap_or(0)
    }

    /// Distance from `x` to the iterate at component `i`'s last refresh.
    pub fn refresh_movement(&self, i: usize, x: &[f64]) -> Option<f64> {
        self.refresh_points
            .as_ref()
            .map(|p| vecmath::dist(&p[i], x))
    }

    fn recompute_aggregate(&mut self) {
        self.aggregate.fill(0.0);
        for i in 0..self.m {
            for j in 0..self.n {
                self.aggregate[j] += self.stored[i][j];
            }
        }
        self.commits_since_recompute = 0;
    }

    /// Refreshes the given components (ascending order) at iterate `x`,
    /// updating the aggregate incrementally as
    /// `S <- (S - w_i_old) + w_i_new`. Returns true if the periodic exact
    /// recompute fired afterwards.
    pub fn refresh_set(
        &mut self,
        problem: &CompositeProblem,
        indices: &[usize],
        x: &[f64],
        k: u64,
    ) -> Result<bool> {
        if !self.warm {
            return Err(Error::NotWarmStarted);
        }
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        for &i in indices {
            if i >= self.m {
                return Err(Error::invalid(format!("component index {i} out of range")));
            }
            problem.component(i).grad_into(x, &mut self.scratch);
            for j in 0..self.n {
                self.aggregate[j] = (self.aggregate[j] - self.stored[i][j]) + self.scratch[j];
            }
            self.stored[i].copy_from_slice(&self.scratch);
            self.last_refresh[i] = k;
            if let Some(points) = self.refresh_points.as_mut() {
                points[i].copy_from_slice(x);
            }
        }
        self.commits_since_recompute += 1;
        if self.commits_since_recompute >= self.m {
            self.recompute_aggregate();
            return Ok(true);
        }
        Ok(false)
    }

    /// Scheme I step: refresh component `i_k` at `x` and return the updated
    /// aggregate `v^k = (S - w_{i_k}) + grad f_{i_k}(x)`, plus the recompute
    /// flag.
    pub fn aggregate_iag(
        &mut self,
        problem: &CompositeProblem,
        i_k: usize,
        x: &[f64],
        k: u64,
    ) -> Result<(Vec<f64>, bool)> {
        let recomputed = self.refresh_set(problem, &[i_k], x, k)?;
        Ok((self.aggregate.clone(), recomputed))
    }

    /// Refreshes every component and resums the aggregate exactly; the
    /// returned vector is bitwise the ascending-order full gradient at `x`.
    pub fn full_refresh(
        &mut self,
        problem: &CompositeProblem,
        x: &[f64],
        k: u64,
    ) -> Result<Vec<f64>> {
        if !self.warm {
            return Err(Error::NotWarmStarted);
        }
        self.aggregate.fill(0.0);
        for i in 0..self.m {
            problem.component(i).grad_into(x, &mut self.stored[i]);
            problem.component(i).grad_accumulate(x, &mut self.aggregate);
            self.last_refresh[i] = k;
            if let Some(points) = self.refresh_points.as_mut() {
                points[i].copy_from_slice(x);
            }
        }
        self.commits_since_recompute = 0;
        Ok(self.aggregate.clone())
    }

    /// Re-anchors the snapshot at `x`: stored gradients, exact aggregate and
    /// the snapshot full gradient all refresh together.
    pub fn refresh_snapshot(
        &mut self,
        problem: &CompositeProblem,
        x: &[f64],
        k: u64,
    ) -> Result<()> {
        if !self.warm {
            return Err(Error::NotWarmStarted);
        }
        for i in 0..self.m {
            problem.component(i).grad_into(x, &mut self.stored[i]);
            self.last_refresh[i] = k;
        }
        self.recompute_aggregate();
        self.snapshot = Some(Snapshot {
            x: x.to_vec(),
            grad: self.aggregate.clone(),
            step: k,
        });
        Ok(())
    }

    /// Scheme II step:
    /// `v^k = (grad f_{i_k}(x) - grad f_{i_k}(x_snap)) + grad f(x_snap)`.
    /// The stored table is left untouched between snapshot refreshes.
    pub fn aggregate_svrg(
        &mut self,
        problem: &CompositeProblem,
        i_k: usize,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        if !self.warm {
            return Err(Error::NotWarmStarted);
        }
        let snap = self.snapshot.as_ref().ok_or(Error::MissingSnapshot)?;
        problem.component(i_k).grad_into(x, &mut self.scratch);
        let mut v = vec![0.0; self.n];
        for j in 0..self.n {
            v[j] = (self.scratch[j] - self.stored[i_k][j]) + snap.grad[j];
        }
        Ok(v)
    }
}

/// Lazy-aggregation refresh selection: component `i` refreshes when its true
/// gradient moved beyond the trigger threshold, or when its age reaches the
/// hard cap. `hard_cap` must not exceed the scheduler's staleness bound.
pub fn lag_select(
    table: &GradientTable,
    problem: &CompositeProblem,
    x: &[f64],
    k: u64,
    threshold: &LagThreshold,
    hard_cap: usize,
    tau_bound: usize,
) -> Result<Vec<usize>> {
    if !table.is_warm() {
        return Err(Error::NotWarmStarted);
    }
    if hard_cap > tau_bound {
        return Err(Error::invalid(format!(
            "lag hard cap {hard_cap} exceeds the staleness bound {tau_bound}"
        )));
    }
    let mut grad = vec![0.0; x.len()];
    let mut set = Vec::new();
    for i in 0..table.num_components() {
        if table.age(i, k) >= hard_cap as u64 {
            set.push(i);
            continue;
        }
        problem.component(i).grad_into(x, &mut grad);
        let change = vecmath::dist(&grad, table.stored(i));
        let thr = match threshold {
            LagThreshold::Constant(c) => *c,
            LagThreshold::MovementScaled { theta } => {
                let movement = table
                    .refresh_movement(i, x)
                    .ok_or_else(|| Error::invalid("movement trigger needs refresh tracking"))?;
                theta * problem.lipschitz_per_component()[i] * movement
            }
        };
        if change > thr {
            set.push(i);
        }
    }
    Ok(set)
}
