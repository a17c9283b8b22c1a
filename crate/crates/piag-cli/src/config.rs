//! The run configuration and its flat `key = value` file format.
//!
//! The format is sectioned INI-style text parsed by a small hand-rolled
//! reader: `[section]` headers, one `key = value` pair per line, `#` or `;`
//! comments, blank lines ignored. Serialization emits sections and keys in a
//! fixed order so serialize -> parse -> serialize is byte-stable.

use crate::{CliError, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Lasso {
        n: usize,
        m: usize,
        seed: u64,
        sparsity: f64,
    },
    RestrictedSc {
        n: usize,
        m: usize,
        rank: usize,
        seed: u64,
    },
    Classification {
        n: usize,
        m: usize,
        seed: u64,
        label_noise: f64,
        loss: LossKind,
        subsample: Option<usize>,
    },
    Libsvm {
        path: String,
        loss: LossKind,
        n_override: Option<usize>,
        subsample: Option<usize>,
        scale_features: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
    SquaredLogistic,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Logistic => "logistic",
            LossKind::SquaredLogistic => "squared_logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossKind::Logistic),
            "squared_logistic" => Ok(LossKind::SquaredLogistic),
            other => Err(CliError::config(format!("unknown loss kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSpec {
    /// `||b||^2`, the bound the least-squares objective at zero puts on the
    /// solution's l1 norm.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegSpec {
    pub kind: RegKind,
    pub lambda: f64,
    pub radius: RadiusSpec,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    Zero,
    L1,
    L1Box,
    Mcp,
}

impl RegKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegKind::Zero => "zero",
            RegKind::L1 => "l1",
            RegKind::L1Box => "l1_box",
            RegKind::Mcp => "mcp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSpec {
    ProxGrad,
    Iag,
    Svrg,
    Lag,
}

impl SchemeSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeSpec::ProxGrad => "prox_grad",
            SchemeSpec::Iag => "iag",
            SchemeSpec::Svrg => "svrg",
            SchemeSpec::Lag => "lag",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerSpec {
    Cyclic,
    Shuffled { seed: Option<u64> },
    SyntheticDelay { delays: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LagThresholdSpec {
    Constant(f64),
    Movement(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    FixedConvex,
    FixedNonconvex,
    LineSearch,
}

impl StepSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepSpec::FixedConvex => "fixed_convex",
            StepSpec::FixedNonconvex => "fixed_nonconvex",
            StepSpec::LineSearch => "line_search",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FStarSpec {
    Auto,
    None,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub scheme: SchemeSpec,
    pub scheduler: SchedulerSpec,
    pub lag_threshold: LagThresholdSpec,
    pub lag_hard_cap: usize,
    pub step: StepSpec,
    pub c: f64,
    pub eta: f64,
    pub c1: AutoOr,
    pub c2: AutoOr,
    pub j_max: u32,
    pub budget: u64,
    pub tol: f64,
    pub cadence: u64,
    pub seed: u64,
    pub f_star: FStarSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    Geometric { amplitude: f64, zeta: f64 },
    Power { amplitude: f64, eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub regularizer: RegSpec,
    pub solver: SolverSpec,
    pub noise: NoiseSpec,
    pub output: OutputSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            scheme: SchemeSpec::Iag,
            scheduler: SchedulerSpec::Cyclic,
            lag_threshold: LagThresholdSpec::Constant(1e-3),
            lag_hard_cap: 1,
            step: StepSpec::FixedConvex,
            c: 0.99,
            eta: 0.5,
            c1: AutoOr::Auto,
            c2: AutoOr::Auto,
            j_max: 60,
            budget: 10_000,
            tol: 1e-10,
            cadence: 1,
            seed: 42,
            f_star: FStarSpec::Auto,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip decimal keeps configs readable and byte-stable
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    s
}

impl RunConfig {
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        s.push_str("[problem]\n");
        match &self.problem {
            ProblemSpec::Lasso {
                n,
                m,
                seed,
                sparsity,
            } => {
                let _ = writeln!(s, "kind = lasso");
                let _ = writeln!(s, "n = {n}");
                let _ = writeln!(s, "m = {m}");
                let _ = writeln!(s, "seed = {seed}");
                let _ = writeln!(s, "sparsity = {}", fmt_f64(*sparsity));
            }
            ProblemSpec::RestrictedSc { n, m, rank, seed } => {
                let _ = writeln!(s, "kind = restricted_sc");
                let _ = writeln!(s, "n = {n}");
                let _ = writeln!(s, "m = {m}");
                let _ = writeln!(s, "rank = {rank}");
                let _ = writeln!(s, "seed = {seed}");
            }
            ProblemSpec::Classification {
                n,
                m,
                seed,
                label_noise,
                loss,
                subsample,
            } => {
                let _ = writeln!(s, "kind = classification");
                let _ = writeln!(s, "n = {n}");
                let _ = writeln!(s, "m = {m}");
                let _ = writeln!(s, "seed = {seed}");
                let _ = writeln!(s, "label_noise = {}", fmt_f64(*label_noise));
                let _ = writeln!(s, "loss = {}", loss.as_str());
                if let Some(ss) = subsample {
                    let _ = writeln!(s, "subsample = {ss}");
                }
            }
            ProblemSpec::Libsvm {
                path,
                loss,
                n_override,
                subsample,
                scale_features,
            } => {
                let _ = writeln!(s, "kind = libsvm");
                let _ = writeln!(s, "path = {path}");
                let _ = writeln!(s, "loss = {}", loss.as_str());
                if let Some(n) = n_override {
                    let _ = writeln!(s, "n_override = {n}");
                }
                if let Some(ss) = subsample {
                    let _ = writeln!(s, "subsample = {ss}");
                }
                let _ = writeln!(s, "scale_features = {scale_features}");
            }
        }
        s.push_str("\n[regularizer]\n");
        let _ = writeln!(s, "kind = {}", self.regularizer.kind.as_str());
        match self.regularizer.kind {
            RegKind::Zero => {}
            RegKind::L1 => {
                let _ = writeln!(s, "lambda = {}", fmt_f64(self.regularizer.lambda));
            }
            RegKind::L1Box => {
                let _ = writeln!(s, "lambda = {}", fmt_f64(self.regularizer.lambda));
                match self.regularizer.radius {
                    RadiusSpec::Auto => {
                        let _ = writeln!(s, "radius = auto");
                    }
                    RadiusSpec::Fixed(r) => {
                        let _ = writeln!(s, "radius = {}", fmt_f64(r));
                    }
                }
            }
            RegKind::Mcp => {
                let _ = writeln!(s, "lambda = {}", fmt_f64(self.regularizer.lambda));
                let _ = writeln!(s, "theta = {}", fmt_f64(self.regularizer.theta));
            }
        }
        s.push_str("\n[solver]\n");
        let sv = &self.solver;
        let _ = writeln!(s, "scheme = {}", sv.scheme.as_str());
        match &sv.scheduler {
            SchedulerSpec::Cyclic => {
                let _ = writeln!(s, "scheduler = cyclic");
            }
            SchedulerSpec::Shuffled { seed } => {
                let _ = writeln!(s, "scheduler = shuffled");
                if let Some(seed) = seed {
                    let _ = writeln!(s, "shuffle_seed = {seed}");
                }
            }
            SchedulerSpec::SyntheticDelay { delays } => {
                let _ = writeln!(s, "scheduler = synthetic_delay");
                let list: Vec<String> = delays.iter().map(|d| d.to_string()).collect();
                let _ = writeln!(s, "delays = {}", list.join(","));
            }
        }
        if sv.scheme == SchemeSpec::Lag {
            match sv.lag_threshold {
                LagThresholdSpec::Constant(v) => {
                    let _ = writeln!(s, "lag_threshold = constant:{}", fmt_f64(v));
                }
                LagThresholdSpec::Movement(theta) => {
                    let _ = writeln!(s, "lag_threshold = movement:{}", fmt_f64(theta));
                }
            }
            let _ = writeln!(s, "lag_hard_cap = {}", sv.lag_hard_cap);
        }
        let _ = writeln!(s, "step = {}", sv.step.as_str());
        let _ = writeln!(s, "c = {}", fmt_f64(sv.c));
        if sv.step == StepSpec::LineSearch {
            let _ = writeln!(s, "eta = {}", fmt_f64(sv.eta));
            match sv.c1 {
                AutoOr::Auto => {
                    let _ = writeln!(s, "c1 = auto");
                }
                AutoOr::Value(v) => {
                    let _ = writeln!(s, "c1 = {}", fmt_f64(v));
                }
            }
            match sv.c2 {
                AutoOr::Auto => {
                    let _ = writeln!(s, "c2 = auto");
                }
                AutoOr::Value(v) => {
                    let _ = writeln!(s, "c2 = {}", fmt_f64(v));
                }
            }
            let _ = writeln!(s, "j_max = {}", sv.j_max);
        }
        let _ = writeln!(s, "budget = {}", sv.budget);
        let _ = writeln!(s, "tol = {}", fmt_f64(sv.tol));
        let _ = writeln!(s, "cadence = {}", sv.cadence);
        let _ = writeln!(s, "seed = {}", sv.seed);
        match sv.f_star {
            FStarSpec::Auto => {
                let _ = writeln!(s, "f_star = auto");
            }
            FStarSpec::None => {
                let _ = writeln!(s, "f_star = none");
            }
            FStarSpec::Value(v) => {
                let _ = writeln!(s, "f_star = {}", fmt_f64(v));
            }
        }
        s.push_str("\n[noise]\n");
        match &self.noise {
            NoiseSpec::None => {
                let _ = writeln!(s, "kind = none");
            }
            NoiseSpec::Geometric { amplitude, zeta } => {
                let _ = writeln!(s, "kind = geometric");
                let _ = writeln!(s, "amplitude = {}", fmt_f64(*amplitude));
                let _ = writeln!(s, "zeta = {}", fmt_f64(*zeta));
            }
            NoiseSpec::Power { amplitude, eta } => {
                let _ = writeln!(s, "kind = power");
                let _ = writeln!(s, "amplitude = {}", fmt_f64(*amplitude));
                let _ = writeln!(s, "eta = {}", fmt_f64(*eta));
            }
        }
        s.push_str("\n[output]\n");
        let _ = writeln!(s, "dir = {}", self.output.dir);
        let _ = writeln!(s, "name = {}", self.output.name);
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_config_string()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let sections = parse_sections(text)?;
        let problem = parse_problem(
            sections
                .get("problem")
                .ok_or_else(|| CliError::config("missing [problem] section"))?,
        )?;
        let regularizer = parse_regularizer(
            sections
                .get("regularizer")
                .ok_or_else(|| CliError::config("missing [regularizer] section"))?,
        )?;
        let solver = parse_solver(
            sections
                .get("solver")
                .ok_or_else(|| CliError::config("missing [solver] section"))?,
        )?;
        let noise = match sections.get("noise") {
            Some(kv) => parse_noise(kv)?,
            None => NoiseSpec::None,
        };
        let output = match sections.get("output") {
            Some(kv) => OutputSpec {
                dir: kv.require("dir")?.to_string(),
                name: kv.require("name")?.to_string(),
            },
            None => OutputSpec {
                dir: "out".to_string(),
                name: "run".to_string(),
            },
        };
        for name in sections.keys() {
            if !matches!(
                name.as_str(),
                "problem" | "regularizer" | "solver" | "noise" | "output"
            ) {
                return Err(CliError::config(format!("unknown section [{name}]")));
            }
        }
        Ok(RunConfig {
            problem,
            regularizer,
            solver,
            noise,
            output,
        })
    }
}

struct Section {
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| CliError::config(format!("missing key '{key}'")))
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, raw) = self
            .entries
            .get(key)
            .ok_or_else(|| CliError::config(format!("missing key '{key}'")))?;
        raw.parse::<T>()
            .map_err(|_| CliError::parse(*line, format!("invalid value '{raw}' for '{key}'")))
    }

    fn parse_num_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(_) => self.parse_num(key),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(CliError::parse(*line, format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(CliError::parse(line_no, "unterminated section header"));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            if name.is_empty() {
                return Err(CliError::parse(line_no, "empty section name"));
            }
            sections.entry(name.clone()).or_insert(Section {
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::parse(line_no, "expected 'key = value'"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(CliError::parse(line_no, "empty key"));
        }
        let section = current
            .as_ref()
            .ok_or_else(|| CliError::parse(line_no, "key before any [section]"))?;
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if entries.insert(key.clone(), (line_no, value)).is_some() {
            return Err(CliError::parse(line_no, format!("duplicate key '{key}'")));
        }
    }
    Ok(sections)
}

fn parse_problem(kv: &Section) -> Result<ProblemSpec> {
    let kind = kv.require("kind")?;
    match kind {
        "lasso" => {
            kv.check_known(&["kind", "n", "m", "seed", "sparsity"])?;
            Ok(ProblemSpec::Lasso {
                n: kv.parse_num("n")?,
                m: kv.parse_num("m")?,
                seed: kv.parse_num("seed")?,
                sparsity: kv.parse_num_or("sparsity", 0.2)?,
            })
        }
        "restricted_sc" => {
            kv.check_known(&["kind", "n", "m", "rank", "seed"])?;
            Ok(ProblemSpec::RestrictedSc {
                n: kv.parse_num("n")?,
                m: kv.parse_num("m")?,
                rank: kv.parse_num("rank")?,
                seed: kv.parse_num("seed")?,
            })
        }
        "classification" => {
            kv.check_known(&["kind", "n", "m", "seed", "label_noise", "loss", "subsample"])?;
            let subsample = match kv.get("subsample") {
                Some(_) => Some(kv.parse_num("subsample")?),
                None => None,
            };
            Ok(ProblemSpec::Classification {
                n: kv.parse_num("n")?,
                m: kv.parse_num("m")?,
                seed: kv.parse_num("seed")?,
                label_noise: kv.parse_num_or("label_noise", 0.39)?,
                loss: LossKind::parse(kv.require("loss")?)?,
                subsample,
            })
        }
        "libsvm" => {
            kv.check_known(&[
                "kind",
                "path",
                "loss",
                "n_override",
                "subsample",
                "scale_features",
            ])?;
            let n_override = match kv.get("n_override") {
                Some(_) => Some(kv.parse_num("n_override")?),
                None => None,
            };
            let subsample = match kv.get("subsample") {
                Some(_) => Some(kv.parse_num("subsample")?),
                None => None,
            };
            Ok(ProblemSpec::Libsvm {
                path: kv.require("path")?.to_string(),
                loss: LossKind::parse(kv.require("loss")?)?,
                n_override,
                subsample,
                scale_features: kv.parse_num_or("scale_features", false)?,
            })
        }
        other => Err(CliError::config(format!("unknown problem kind '{other}'"))),
    }
}

fn parse_regularizer(kv: &Section) -> Result<RegSpec> {
    kv.check_known(&["kind", "lambda", "radius", "theta"])?;
    let kind = match kv.require("kind")? {
        "zero" => RegKind::Zero,
        "l1" => RegKind::L1,
        "l1_box" => RegKind::L1Box,
        "mcp" => RegKind::Mcp,
        other => return Err(CliError::config(format!("unknown regularizer '{other}'"))),
    };
    let lambda = kv.parse_num_or("lambda", 0.0)?;
    let radius = match kv.get("radius") {
        None | Some("auto") => RadiusSpec::Auto,
        Some(_) => RadiusSpec::Fixed(kv.parse_num("radius")?),
    };
    let theta = kv.parse_num_or("theta", 4.0)?;
    Ok(RegSpec {
        kind,
        lambda,
        radius,
        theta,
    })
}

fn parse_solver(kv: &Section) -> Result<SolverSpec> {
    kv.check_known(&[
        "scheme",
        "scheduler",
        "shuffle_seed",
        "delays",
        "lag_threshold",
        "lag_hard_cap",
        "step",
        "c",
        "eta",
        "c1",
        "c2",
        "j_max",
        "budget",
        "tol",
        "cadence",
        "seed",
        "f_star",
    ])?;
    let defaults = SolverSpec::default();
    let scheme = match kv.get("scheme").unwrap_or("iag") {
        "prox_grad" => SchemeSpec::ProxGrad,
        "iag" => SchemeSpec::Iag,
        "svrg" => SchemeSpec::Svrg,
        "lag" => SchemeSpec::Lag,
        other => return Err(CliError::config(format!("unknown scheme '{other}'"))),
    };
    let scheduler = match kv.get("scheduler").unwrap_or("cyclic") {
        "cyclic" => SchedulerSpec::Cyclic,
        "shuffled" => SchedulerSpec::Shuffled {
            seed: match kv.get("shuffle_seed") {
                Some(_) => Some(kv.parse_num("shuffle_seed")?),
                None => None,
            },
        },
        "synthetic_delay" => {
            let raw = kv.require("delays")?;
            let delays: std::result::Result<Vec<usize>, _> =
                raw.split(',').map(|t| t.trim().parse::<usize>()).collect();
            SchedulerSpec::SyntheticDelay {
                delays: delays
                    .map_err(|_| CliError::config(format!("invalid delays list '{raw}'")))?,
            }
        }
        other => return Err(CliError::config(format!("unknown scheduler '{other}'"))),
    };
    let lag_threshold = match kv.get("lag_threshold") {
        None => defaults.lag_threshold.clone(),
        Some(raw) => {
            let (kind, value) = raw.split_once(':').ok_or_else(|| {
                CliError::config("lag_threshold wants 'constant:<v>' or 'movement:<theta>'")
            })?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("invalid lag threshold value '{value}'")))?;
            match kind.trim() {
                "constant" => LagThresholdSpec::Constant(v),
                "movement" => LagThresholdSpec::Movement(v),
                other => {
                    return Err(CliError::config(format!(
                        "unknown lag threshold rule '{other}'"
                    )))
                }
            }
        }
    };
    let step = match kv.get("step").unwrap_or("fixed_convex") {
        "fixed_convex" => StepSpec::FixedConvex,
        "fixed_nonconvex" => StepSpec::FixedNonconvex,
        "line_search" => StepSpec::LineSearch,
        other => return Err(CliError::config(format!("unknown step mode '{other}'"))),
    };
    let auto_or = |key: &str| -> Result<AutoOr> {
        match kv.get(key) {
            None | Some("auto") => Ok(AutoOr::Auto),
            Some(_) => Ok(AutoOr::Value(kv.parse_num(key)?)),
        }
    };
    let f_star = match kv.get("f_star") {
        None | Some("auto") => FStarSpec::Auto,
        Some("none") => FStarSpec::None,
        Some(_) => FStarSpec::Value(kv.parse_num("f_star")?),
    };
    Ok(SolverSpec {
        scheme,
        scheduler,
        lag_threshold,
        lag_hard_cap: kv.parse_num_or("lag_hard_cap", defaults.lag_hard_cap)?,
        step,
        c: kv.parse_num_or("c", defaults.c)?,
        eta: kv.parse_num_or("eta", defaults.eta)?,
        c1: auto_or("c1")?,
        c2: auto_or("c2")?,
        j_max: kv.parse_num_or("j_max", defaults.j_max)?,
        budget: kv.parse_num_or("budget", defaults.budget)?,
        tol: kv.parse_num_or("tol", defaults.tol)?,
        cadence: kv.parse_num_or("cadence", defaults.cadence)?,
        seed: kv.parse_num_or("seed", defaults.seed)?,
        f_star,
    })
}

fn parse_noise(kv: &Section) -> Result<NoiseSpec> {
    kv.check_known(&["kind", "amplitude", "zeta", "eta"])?;
    match kv.get("kind").unwrap_or("none") {
        "none" => Ok(NoiseSpec::None),
        "geometric" => Ok(NoiseSpec::Geometric {
            amplitude: kv.parse_num_or("amplitude", 1.0)?,
            zeta: kv.parse_num_or("zeta", 0.5)?,
        }),
        "power" => Ok(NoiseSpec::Power {
            amplitude: kv.parse_num_or("amplitude", 1.0)?,
            eta: kv.parse_num_or("eta", 1.5)?,
        }),
        other => Err(CliError::config(format!("unknown noise kind '{other}'"))),
    }
}
