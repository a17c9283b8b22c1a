//! Experiment presets over the loss/regularizer grid: {logistic, squared
//! logistic} x {l1, mcp} x {incremental, snapshot} aggregation, each run with
//! the fixed step and its line-search counterpart under identical seeds.

use crate::config::*;
use crate::runner::{execute, Execution};
use crate::{CliError, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub convex_loss: bool,
    pub l1_reg: bool,
    pub scheme_one: bool,
}

pub const PRESET_NAMES: [&str; 8] = [
    "conv_l1_I",
    "conv_l1_II",
    "conv_mcp_I",
    "conv_mcp_II",
    "nonconv_l1_I",
    "nonconv_l1_II",
    "nonconv_mcp_I",
    "nonconv_mcp_II",
];

impl Preset {
    pub fn parse(name: &str) -> Result<Preset> {
        let parts: Vec<&str> = name.split('_').collect();
        if parts.len() != 3 {
            return Err(CliError::config(format!(
                "unknown preset '{name}'; expected one of {PRESET_NAMES:?}"
            )));
        }
        let convex_loss = match parts[0] {
            "conv" => true,
            "nonconv" => false,
            _ => {
                return Err(CliError::config(format!("unknown preset '{name}'")));
            }
        };
        let l1_reg = match parts[1] {
            "l1" => true,
            "mcp" => false,
            _ => {
                return Err(CliError::config(format!("unknown preset '{name}'")));
            }
        };
        let scheme_one = match parts[2] {
            "I" => true,
            "II" => false,
            _ => {
                return Err(CliError::config(format!("unknown preset '{name}'")));
            }
        };
        Ok(Preset {
            convex_loss,
            l1_reg,
            scheme_one,
        })
    }

    pub fn name(&self) -> String {
        format!(
            "{}_{}_{}",
            if self.convex_loss { "conv" } else { "nonconv" },
            if self.l1_reg { "l1" } else { "mcp" },
            if self.scheme_one { "I" } else { "II" }
        )
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    /// Built-in classification generator (featurized for well-conditioned
    /// desk-scale runs).
    Synthetic {
        n: usize,
        m: usize,
        seed: u64,
        label_noise: f64,
    },
    Libsvm(PathBuf),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            n: 4,
            m: 600,
            seed: 7,
            label_noise: 0.39,
        }
    }
}

/// Default regularizer weights of the preset grid. These are desk-scale
/// choices, not tuned to reproduce any published figure.
pub const PRESET_LAMBDA: f64 = 0.05;
pub const PRESET_MCP_THETA: f64 = 4.0;
pub const PRESET_C: f64 = 0.99;
/// Default row subsample for preset experiments.
pub const PRESET_SUBSAMPLE: usize = 500;

pub fn preset_config(
    preset: Preset,
    data: &DataSource,
    subsample: Option<usize>,
    budget: u64,
    cadence: u64,
    line_search: bool,
) -> RunConfig {
    let loss = if preset.convex_loss {
        LossKind::Logistic
    } else {
        LossKind::SquaredLogistic
    };
    let subsample = subsample.or(Some(PRESET_SUBSAMPLE));
    let problem = match data {
        DataSource::Synthetic {
            n,
            m,
            seed,
            label_noise,
        } => ProblemSpec::Classification {
            n: *n,
            m: *m,
            seed: *seed,
            label_noise: *label_noise,
            loss,
            subsample,
        },
        DataSource::Libsvm(path) => ProblemSpec::Libsvm {
            path: path.display().to_string(),
            loss,
            n_override: None,
            subsample,
            scale_features: false,
        },
    };
    let regularizer = if preset.l1_reg {
        RegSpec {
            kind: RegKind::L1,
            lambda: PRESET_LAMBDA,
            radius: RadiusSpec::Auto,
            theta: PRESET_MCP_THETA,
        }
    } else {
        RegSpec {
            kind: RegKind::Mcp,
            lambda: PRESET_LAMBDA,
            radius: RadiusSpec::Auto,
            theta: PRESET_MCP_THETA,
        }
    };
    let mut solver = SolverSpec::default();
    solver.scheme = if preset.scheme_one {
        SchemeSpec::Iag
    } else {
        SchemeSpec::Svrg
    };
    solver.scheduler = SchedulerSpec::Cyclic;
    solver.step = if line_search {
        StepSpec::LineSearch
    } else if preset.l1_reg {
        StepSpec::FixedConvex
    } else {
        StepSpec::FixedNonconvex
    };
    solver.c = PRESET_C;
    solver.budget = budget;
    solver.cadence = cadence;
    solver.tol = 0.0;
    // nonconvex objectives have no trustworthy reference minimum
    solver.f_star = if preset.convex_loss && preset.l1_reg {
        FStarSpec::Auto
    } else {
        FStarSpec::None
    };
    let variant = if line_search { "ls" } else { "fixed" };
    RunConfig {
        problem,
        regularizer,
        solver,
        noise: NoiseSpec::None,
        output: OutputSpec {
            dir: "out".to_string(),
            name: format!("{}_{variant}", preset.name()),
        },
    }
}

pub struct PresetOutcome {
    pub fixed: Execution,
    pub linesearch: Execution,
    pub files: Vec<PathBuf>,
}

/// Runs the fixed-step and line-search variants of a preset with identical
/// seeds and (optionally) emits the paired trace/summary files.
pub fn run_preset(
    preset: Preset,
    data: &DataSource,
    subsample: Option<usize>,
    budget: u64,
    cadence: u64,
    out_dir: Option<&Path>,
) -> Result<PresetOutcome> {
    let fixed_cfg = preset_config(preset, data, subsample, budget, cadence, false);
    let ls_cfg = preset_config(preset, data, subsample, budget, cadence, true);
    let fixed = execute(&fixed_cfg)?;
    let linesearch = execute(&ls_cfg)?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        let (t1, s1) = crate::runner::emit_outputs(&fixed, dir)?;
        let (t2, s2) = crate::runner::emit_outputs(&linesearch, dir)?;
        files.extend([t1, s1, t2, s2]);
    }
    Ok(PresetOutcome {
        fixed,
        linesearch,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_preset_names_parse() {
        for name in PRESET_NAMES {
            let p = Preset::parse(name).unwrap();
            assert_eq!(p.name(), name);
        }
        assert!(Preset::parse("conv_l2_I").is_err());
        assert!(Preset::parse("bogus").is_err());
    }

    #[test]
    fn preset_configs_pick_step_rule_by_regularizer() {
        let data = DataSource::default();
        let p = Preset::parse("conv_l1_I").unwrap();
        let cfg = preset_config(p, &data, None, 100, 10, false);
        assert_eq!(cfg.solver.step, StepSpec::FixedConvex);
        assert_eq!(cfg.solver.scheme, SchemeSpec::Iag);

        let p = Preset::parse("nonconv_mcp_II").unwrap();
        let cfg = preset_config(p, &data, None, 100, 10, false);
        assert_eq!(cfg.solver.step, StepSpec::FixedNonconvex);
        assert_eq!(cfg.solver.scheme, SchemeSpec::Svrg);
        assert!(matches!(
            cfg.problem,
            ProblemSpec::Classification {
                loss: LossKind::SquaredLogistic,
                subsample: Some(500),
                ..
            }
        ));
    }
}
