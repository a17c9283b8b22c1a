//! Deterministic solvers for composite minimization
//!
//! ```text
//!     minimize  F(x) = f(x) + g(x),    f(x) = sum_i f_i(x),
//! ```
//!
//! where each smooth component `f_i` has an `L_i`-Lipschitz gradient and `g`
//! is proximable (possibly nonconvex). The iteration is the proximal
//! incremental aggregated gradient (PIAG) update
//!
//! ```text
//!     x^{k+1} = prox_{gamma g}[ x^k - gamma * v^k ],
//!     v^k     = sum_i grad f_i(x^{k - tau_{i,k}}) + e^k,
//! ```
//!
//! built from per-component gradients of bounded staleness `tau_{i,k} <= tau`
//! plus an optional deterministic noise sequence `e^k`. Degenerate and
//! relative instances covered by the same driver: exact proximal gradient
//! (`tau = 0`), cyclic/shuffled incremental aggregation (deterministic
//! SAG/SAGA), snapshot-corrected aggregation (deterministic SVRG), and lazy
//! refresh triggered by gradient change (LAG).
//!
//! Beyond the solvers, the crate carries a diagnostics engine that evaluates
//! the Lyapunov functions governing the convergence of these schemes, counts
//! per-step descent violations, certifies subgradient residual bounds, and
//! fits sublinear/linear convergence rates against a high-accuracy reference
//! solution.

pub mod diag;
pub mod error;
pub mod losses;
pub mod noise;
pub mod problem;
pub mod prox;
pub mod reference;
pub mod schedule;
pub mod solver;
pub mod table;
pub mod vecmath;

pub use error::{Error, Result};
pub use losses::{
    logistic_component, quadratic_component, squared_logistic_component, LabeledSample,
};
pub use noise::{NoiseKind, NoiseSchedule};
pub use problem::{CompositeProblem, DeltaHistory, SmoothComponent};
pub use prox::Regularizer;
pub use reference::{reference_prox_grad, ReferenceSolution};
pub use schedule::{LagThreshold, SchedulerKind};
pub use solver::{
    run, RunResult, Scheme, SolverConfig, StepMode, StepSizePolicy, Termination, TraceRow,
};
pub use table::GradientTable;
pub use vecmath::SparseRow;
