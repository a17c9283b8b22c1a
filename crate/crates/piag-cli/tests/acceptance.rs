//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Run with
//! `cargo test -p piag-cli --test acceptance -- --nocapture`.
//!
//! A1  per-step Lyapunov descent, zero violations over 1e4 steps, < 10 s
//! A2  zero-delay runs match textbook proximal gradient bitwise, all combos
//! A3  sublinear statistic k (F - F*) bounded with non-increasing trend
//! A4  linear rate on the rank-deficient instance: omega in (0,1), R2 > 0.99
//! A5  geometric noise keeps the linear rate; power noise still converges
//! A6  line search never ends above the fixed step on the preset grid
//! A7  nonconvex run: residual below 1e-4, zero descent violations
//! A8  oracle suites: prox grid, gradient FD, aggregate recompute, eps residual
//! A9  residual-norm bound holds at every logged step of every run above

use piag::solver::{run, Scheme, SolverConfig, StepSizePolicy};
use piag::{
    diag, logistic_component, quadratic_component, squared_logistic_component, CompositeProblem,
    NoiseSchedule, Regularizer, SchedulerKind, SmoothComponent,
};
use piag_cli::config::*;
use piag_cli::presets::{run_preset, DataSource, Preset, PRESET_NAMES};
use piag_cli::runner::execute;
use piag_cli::synth;
use std::time::Instant;

fn lasso_config(budget: u64) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::Lasso {
            n: 50,
            m: 100,
            seed: 11,
            sparsity: 0.2,
        },
        regularizer: RegSpec {
            kind: RegKind::L1,
            lambda: 1.0,
            radius: RadiusSpec::Auto,
            theta: 4.0,
        },
        solver: {
            let mut s = SolverSpec::default();
            s.scheme = SchemeSpec::Iag;
            s.step = StepSpec::FixedConvex;
            s.c = 0.99;
            s.budget = budget;
            s.tol = 0.0;
            s.cadence = 1;
            s.f_star = FStarSpec::None;
            s
        },
        noise: NoiseSpec::None,
        output: OutputSpec {
            dir: "out".into(),
            name: "a1".into(),
        },
    }
}

#[test]
fn a1_lyapunov_descent_zero_violations() {
    let start = Instant::now();
    let exec = execute(&lasso_config(10_000)).unwrap();
    let elapsed = start.elapsed();
    let s = &exec.summary;
    assert_eq!(s.scheme, "iag");
    assert_eq!(
        s.lyapunov_checked, 10_000,
        "per-step checks must cover the run"
    );
    assert_eq!(
        s.lyapunov_violations, 0,
        "Lyapunov descent violated {} times",
        s.lyapunov_violations
    );
    assert_eq!(s.residual_bound_violations, 0);
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "run took {:.2}s, budget 10s",
        elapsed.as_secs_f64()
    );
    println!(
        "[PASS] A1: Lyapunov descent over 10^4 steps, 0/{} violations in {:.2}s",
        s.lyapunov_checked,
        elapsed.as_secs_f64()
    );
}

fn a2_problem(loss: &str, reg: Regularizer) -> CompositeProblem {
    let n = 5;
    let m = 7;
    match loss {
        "quadratic" => {
            let inst = synth::make_lasso(n, m, 23, 0.5);
            let comps: Vec<Box<dyn SmoothComponent>> = inst
                .rows
                .into_iter()
                .zip(inst.targets)
                .map(|(r, b)| Box::new(quadratic_component(r, b)) as Box<dyn SmoothComponent>)
                .collect();
            CompositeProblem::new(comps, reg, n).unwrap()
        }
        _ => {
            let samples = synth::make_classification(n, m, 29, 0.3);
            let comps: Vec<Box<dyn SmoothComponent>> = samples
                .into_iter()
                .map(|s| match loss {
                    "logistic" => Box::new(logistic_component(s)) as Box<dyn SmoothComponent>,
                    "squared_logistic" => {
                        Box::new(squared_logistic_component(s)) as Box<dyn SmoothComponent>
                    }
                    _ => unreachable!(),
                })
                .collect();
            CompositeProblem::new(comps, reg, n).unwrap()
        }
    }
}

#[test]
fn a2_zero_delay_matches_proximal_gradient_bitwise() {
    let budget = 1000u64;
    let regs: Vec<(&str, Regularizer)> = vec![
        ("zero", Regularizer::Zero),
        ("l1", Regularizer::L1 { weight: 0.1 }),
        (
            "l1_box",
            Regularizer::L1Box {
                weight: 0.1,
                radius: 5.0,
            },
        ),
        (
            "mcp",
            Regularizer::Mcp {
                weight: 0.1,
                theta: 4.0,
            },
        ),
    ];
    let mut combos = 0;
    for loss in ["logistic", "squared_logistic", "quadratic"] {
        for (reg_name, reg) in &regs {
            let problem = a2_problem(loss, reg.clone());
            let policy = if reg.convex() {
                StepSizePolicy::fixed_convex(0.99)
            } else {
                StepSizePolicy::fixed_nonconvex(0.99)
            };
            let mut cfg = SolverConfig::new(
                Scheme::ProxGrad,
                SchedulerKind::Cyclic,
                NoiseSchedule::none(),
                policy,
                budget,
            );
            cfg.tol = 0.0;
            cfg.cadence = budget;
            cfg.record_iterates = true;
            let res = run(&problem, &cfg).unwrap();
            assert_eq!(res.constants.tau, 0);

            // independent textbook loop at the same step size
            let gamma = res.constants.gamma;
            let n = problem.dim();
            let mut x = vec![0.0; n];
            let iterates = res.iterates.as_ref().unwrap();
            for k in 0..budget {
                let g = problem.full_gradient(&x).unwrap();
                let z: Vec<f64> = (0..n).map(|j| x[j] - gamma * g[j]).collect();
                x = problem.regularizer().prox(&z, gamma).unwrap();
                assert_eq!(
                    &x,
                    &iterates[(k + 1) as usize],
                    "{loss}+{reg_name}: iterates differ at step {k}"
                );
            }
            assert_eq!(res.checks.residual_bound_violations, 0);
            combos += 1;
        }
    }
    println!("[PASS] A2: zero-delay bitwise equivalence on {combos} loss/regularizer combos, 1000 steps each");
}

fn a3_config(budget: u64) -> RunConfig {
    let mut cfg = lasso_config(budget);
    cfg.regularizer = RegSpec {
        kind: RegKind::L1Box,
        lambda: 1.0,
        radius: RadiusSpec::Auto,
        theta: 4.0,
    };
    cfg.solver.f_star = FStarSpec::Auto;
    cfg.output.name = "a3".into();
    cfg
}

#[test]
fn a3_sublinear_statistic_bounded_and_nonincreasing() {
    let start = Instant::now();
    let exec = execute(&a3_config(100_000)).unwrap();
    let elapsed = start.elapsed();
    let rates = exec.summary.rates.as_ref().expect("rates must be fitted");
    // bounded: the tail of k (F - F*) stays below the peak of the first half
    assert!(
        rates.sublinear_sup_tail.is_finite() && rates.sublinear_sup_head.is_finite(),
        "sublinear statistic must be finite"
    );
    assert!(
        rates.sublinear_sup_tail <= rates.sublinear_sup_head,
        "tail sup {} exceeds head sup {}",
        rates.sublinear_sup_tail,
        rates.sublinear_sup_head
    );
    assert!(
        rates.sublinear_trend_slope <= 1e-6,
        "trend slope {} above 1e-6",
        rates.sublinear_trend_slope
    );
    assert_eq!(exec.summary.residual_bound_violations, 0);
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "run took {:.2}s, budget 60s",
        elapsed.as_secs_f64()
    );
    println!(
        "[PASS] A3: k*(F-F*) tail sup {:.3e} <= head sup {:.3e}, trend slope {:.3e} <= 1e-6, in {:.2}s",
        rates.sublinear_sup_tail,
        rates.sublinear_sup_head,
        rates.sublinear_trend_slope,
        elapsed.as_secs_f64()
    );
}

fn a4_config(noise: NoiseSpec, budget: u64, name: &str) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::RestrictedSc {
            n: 10,
            m: 12,
            rank: 6,
            seed: 1,
        },
        regularizer: RegSpec {
            kind: RegKind::L1,
            lambda: 0.1,
            radius: RadiusSpec::Auto,
            theta: 4.0,
        },
        solver: {
            let mut s = SolverSpec::default();
            s.scheme = SchemeSpec::Iag;
            s.step = StepSpec::FixedConvex;
            s.c = 0.99;
            s.budget = budget;
            s.tol = 0.0;
            s.cadence = 1;
            s.f_star = FStarSpec::Auto;
            s
        },
        noise,
        output: OutputSpec {
            dir: "out".into(),
            name: name.into(),
        },
    }
}

#[test]
fn a4_linear_rate_under_restricted_strong_convexity() {
    let exec = execute(&a4_config(NoiseSpec::None, 60_000, "a4")).unwrap();
    let rates = exec.summary.rates.as_ref().expect("rates must be fitted");
    let omega = rates.linear_omega.expect("linear fit must have points");
    let r2 = rates.linear_r2.unwrap();
    assert!(omega > 0.0 && omega < 1.0, "omega {omega} outside (0,1)");
    assert!(r2 > 0.99, "R2 {r2} below 0.99");
    assert_eq!(exec.summary.lyapunov_violations, 0);
    assert_eq!(exec.summary.residual_bound_violations, 0);
    println!(
        "[PASS] A4: linear rate omega = {omega:.6} in (0,1), R2 = {r2:.6} > 0.99 over {} window points",
        rates.linear_points.unwrap()
    );
}

#[test]
fn a5a_geometric_noise_keeps_linear_rate() {
    let noise = NoiseSpec::Geometric {
        amplitude: 1.0,
        zeta: 0.5,
    };
    let exec = execute(&a4_config(noise, 60_000, "a5a")).unwrap();
    let rates = exec.summary.rates.as_ref().expect("rates must be fitted");
    let omega = rates.linear_omega.expect("linear fit must have points");
    let r2 = rates.linear_r2.unwrap();
    assert!(omega > 0.0 && omega < 1.0, "omega {omega} outside (0,1)");
    assert!(r2 > 0.98, "R2 {r2} below 0.98");
    assert_eq!(exec.summary.lyapunov_violations, 0);
    assert_eq!(exec.summary.residual_bound_violations, 0);
    println!("[PASS] A5a: geometric noise (zeta = 0.5): omega = {omega:.6}, R2 = {r2:.6} > 0.98");
}

#[test]
fn a5b_power_noise_still_converges() {
    let noise = NoiseSpec::Power {
        amplitude: 1.0,
        eta: 1.5,
    };
    let exec = execute(&a4_config(noise, 100_000, "a5b")).unwrap();
    let best = exec
        .result
        .trace
        .iter()
        .filter_map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);
    assert!(
        best < 1e-5,
        "residual never dropped below 1e-5 (best {best:.3e})"
    );
    assert_eq!(exec.summary.residual_bound_violations, 0);
    println!("[PASS] A5b: power noise (eta = 1.5): residual reached {best:.3e} < 1e-5 within 10^5 iterations");
}

#[test]
fn a6_line_search_never_loses_to_fixed_step() {
    let data = DataSource::default();
    let mut lines = Vec::new();
    for name in PRESET_NAMES {
        let preset = Preset::parse(name).unwrap();
        let outcome = run_preset(preset, &data, Some(500), 2000, 100, None).unwrap();
        let f_fixed = outcome.fixed.summary.final_f;
        let f_ls = outcome.linesearch.summary.final_f;
        assert!(
            f_ls <= f_fixed,
            "{name}: line search final F {f_ls} above fixed {f_fixed}"
        );
        assert_eq!(outcome.fixed.summary.residual_bound_violations, 0);
        assert_eq!(outcome.linesearch.summary.residual_bound_violations, 0);
        assert_eq!(outcome.linesearch.summary.ls_invariant_violations, 0);
        // the preset grid pins c2 = 1/gamma
        let c2 = outcome.linesearch.summary.c2.unwrap();
        let gamma = outcome.linesearch.summary.gamma;
        assert!((c2 * gamma - 1.0).abs() < 1e-12);
        lines.push(format!("{name}: F_ls {f_ls:.6} <= F_fixed {f_fixed:.6}"));
    }
    println!(
        "[PASS] A6: line search <= fixed step on all 8 preset runs\n       {}",
        lines.join("\n       ")
    );
}

#[test]
fn a7_nonconvex_run_converges_with_zero_descent_violations() {
    let cfg = RunConfig {
        problem: ProblemSpec::Classification {
            n: 4,
            m: 600,
            seed: 7,
            label_noise: 0.39,
            loss: LossKind::SquaredLogistic,
            subsample: Some(500),
        },
        regularizer: RegSpec {
            kind: RegKind::Mcp,
            lambda: 0.05,
            radius: RadiusSpec::Auto,
            theta: 4.0,
        },
        solver: {
            let mut s = SolverSpec::default();
            s.scheme = SchemeSpec::Iag;
            s.step = StepSpec::FixedNonconvex;
            s.c = 0.99;
            s.budget = 100_000;
            s.tol = 0.0;
            s.cadence = 1;
            s.f_star = FStarSpec::None;
            s
        },
        noise: NoiseSpec::None,
        output: OutputSpec {
            dir: "out".into(),
            name: "a7".into(),
        },
    };
    let exec = execute(&cfg).unwrap();
    let s = &exec.summary;
    assert_eq!(s.m, 500);
    assert_eq!(s.step_mode, "fixed_nonconvex");
    let best = exec
        .result
        .trace
        .iter()
        .filter_map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);
    assert!(
        best < 1e-4,
        "residual never dropped below 1e-4 (best {best:.3e})"
    );
    assert_eq!(s.lyapunov_checked, 100_000);
    assert_eq!(
        s.lyapunov_violations, 0,
        "nonconvex descent inequality violated"
    );
    assert_eq!(s.residual_bound_violations, 0);
    println!(
        "[PASS] A7: squared logistic + MCP: residual {best:.3e} < 1e-4, descent 0/{} violations",
        s.lyapunov_checked
    );
}

#[test]
fn a8_oracle_suites() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(88);

    // prox closed forms vs dense grid, 1000 random scalar inputs per kind
    let kinds = [
        Regularizer::Zero,
        Regularizer::L1 { weight: 0.7 },
        Regularizer::L1Box {
            weight: 0.7,
            radius: 1.5,
        },
        Regularizer::Mcp {
            weight: 0.7,
            theta: 3.0,
        },
    ];
    let mut prox_worst: f64 = 0.0;
    for reg in &kinds {
        for _ in 0..1000 {
            let z: f64 = rng.gen_range(-3.0..3.0);
            let gamma: f64 = rng.gen_range(0.05..1.5);
            let closed = reg.prox_scalar(z, gamma);
            let span = z.abs() + 1.0;
            let steps = (2.0 * span / 1e-4).round() as usize;
            let mut best_y = -span;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                let y = -span + 1e-4 * i as f64;
                let val = 0.5 * (z - y) * (z - y) + gamma * reg.value_scalar(y);
                if val < best {
                    best = val;
                    best_y = y;
                }
            }
            prox_worst = prox_worst.max((closed - best_y).abs());
        }
    }
    assert!(prox_worst < 1e-3, "prox grid deviation {prox_worst}");

    // gradient finite differences, all three losses
    let mut fd_worst: f64 = 0.0;
    {
        let samples = synth::make_classification(5, 3, 12, 0.3);
        let comps: Vec<Box<dyn SmoothComponent>> = vec![
            Box::new(logistic_component(samples[0].clone())),
            Box::new(squared_logistic_component(samples[1].clone())),
            Box::new(quadratic_component(samples[2].row().clone(), 0.3)),
        ];
        let mut g = vec![0.0; 5];
        for comp in &comps {
            for _ in 0..100 {
                let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                comp.grad_into(&x, &mut g);
                let mut fd = vec![0.0; 5];
                for j in 0..5 {
                    let h = 1e-6 * (1.0 + x[j].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    fd[j] = (comp.value(&xp) - comp.value(&xm)) / (2.0 * h);
                }
                let num: f64 = g
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                fd_worst = fd_worst.max(num / den);
            }
        }
    }
    assert!(fd_worst < 1e-5, "finite-difference rel err {fd_worst}");

    // aggregate recompute oracle: per-step tolerance and bitwise checkpoints
    let inst = synth::make_lasso(6, 9, 42, 0.4);
    let comps: Vec<Box<dyn SmoothComponent>> = inst
        .rows
        .into_iter()
        .zip(inst.targets)
        .map(|(r, b)| Box::new(quadratic_component(r, b)) as Box<dyn SmoothComponent>)
        .collect();
    let problem = CompositeProblem::new(comps, Regularizer::L1 { weight: 0.2 }, 6).unwrap();
    let mut cfg = SolverConfig::new(
        Scheme::Iag,
        SchedulerKind::Cyclic,
        NoiseSchedule::none(),
        StepSizePolicy::fixed_convex(0.99),
        300,
    );
    cfg.tol = 0.0;
    cfg.record_iterates = true;
    cfg.record_steps = true;
    let res = run(&problem, &cfg).unwrap();
    let iterates = res.iterates.as_ref().unwrap();
    let mut checkpoints = 0;
    for step in res.steps.as_ref().unwrap() {
        let mut oracle = vec![0.0; 6];
        for (i, &age) in step.ages_at_use.iter().enumerate() {
            problem
                .component(i)
                .grad_accumulate(&iterates[(step.k - age) as usize], &mut oracle);
        }
        let diff: f64 = step
            .v_clean
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * scale.max(1.0));
        if let Some(rec) = &step.recompute_aggregate {
            let mut exact = vec![0.0; 6];
            for i in 0..problem.num_components() {
                problem
                    .component(i)
                    .grad_accumulate(&iterates[step.last_refresh_after[i] as usize], &mut exact);
            }
            assert_eq!(rec, &exact, "checkpoint not exact at k = {}", step.k);
            checkpoints += 1;
        }
    }
    assert!(checkpoints >= 33, "expected a checkpoint every m steps");

    // epsilon-equation residual over a parameter grid
    let mut eps_worst: f64 = 0.0;
    for &tau in &[1usize, 2, 5, 17, 100] {
        for &l in &[0.3, 1.0, 47.0] {
            for &c in &[0.1, 0.5, 0.99] {
                let gamma = 2.0 * c / ((2.0 * tau as f64 + 1.0) * l);
                let lc = diag::solve_constants(gamma, l, tau).unwrap();
                let eps = lc.epsilon.unwrap();
                let s = 1.0 + (1.0 / (gamma * l) - 0.5) / tau as f64;
                eps_worst = eps_worst.max(((eps + 1.0 / eps) - s).abs() / s);
            }
        }
    }
    assert!(eps_worst < 1e-12, "eps identity residual {eps_worst}");

    println!(
        "[PASS] A8: prox grid max err {prox_worst:.2e} < 1e-3; gradient FD rel err {fd_worst:.2e} < 1e-5; \
         {checkpoints} exact recompute checkpoints; eps-equation residual {eps_worst:.2e} < 1e-12"
    );
}

#[test]
fn a9_residual_bound_holds_across_run_types() {
    // compact battery covering every configuration family of A1-A7;
    // the full-scale runs assert the same counter inside their own tests
    let mut total_checked = 0u64;
    let mut runs = 0;

    let mut consume = |exec: piag_cli::runner::Execution, what: &str| {
        assert_eq!(
            exec.summary.residual_bound_violations, 0,
            "{what}: residual bound violated"
        );
        assert!(exec.summary.residual_checked > 0);
        total_checked += exec.summary.residual_checked;
        runs += 1;
    };

    consume(execute(&lasso_config(2000)).unwrap(), "lasso scheme I");
    consume(execute(&a3_config(2000)).unwrap(), "lasso + l1_box");
    consume(
        execute(&a4_config(NoiseSpec::None, 2000, "a9_rsc")).unwrap(),
        "restricted_sc",
    );
    consume(
        execute(&a4_config(
            NoiseSpec::Geometric {
                amplitude: 1.0,
                zeta: 0.5,
            },
            2000,
            "a9_geo",
        ))
        .unwrap(),
        "geometric noise",
    );
    consume(
        execute(&a4_config(
            NoiseSpec::Power {
                amplitude: 1.0,
                eta: 1.5,
            },
            2000,
            "a9_pow",
        ))
        .unwrap(),
        "power noise",
    );

    // preset grid at a reduced budget, fixed and line-search variants
    let data = DataSource::default();
    for name in ["conv_l1_I", "conv_mcp_II", "nonconv_l1_II", "nonconv_mcp_I"] {
        let outcome =
            run_preset(Preset::parse(name).unwrap(), &data, Some(120), 400, 1, None).unwrap();
        assert_eq!(
            outcome.fixed.summary.residual_bound_violations, 0,
            "{name} fixed"
        );
        assert_eq!(
            outcome.linesearch.summary.residual_bound_violations, 0,
            "{name} line search"
        );
        total_checked +=
            outcome.fixed.summary.residual_checked + outcome.linesearch.summary.residual_checked;
        runs += 2;
    }

    println!(
        "[PASS] A9: residual-norm bound held at all {total_checked} logged steps across {runs} runs \
         (full-scale runs assert the same counter in A1-A7)"
    );
}
