use clap::{Parser, Subcommand};
use piag_cli::config::RunConfig;
use piag_cli::presets::{DataSource, Preset, PRESET_NAMES, PRESET_SUBSAMPLE};
use piag_cli::{runner, traceio, verify};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "piag",
    about = "Composite-minimization solvers with delayed aggregated gradients, plus convergence diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver configuration and emit its trace and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the `[output]` dir of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset pair (fixed step and line search, identical seeds).
    Preset {
        /// One of: conv_l1_I, conv_l1_II, conv_mcp_I, conv_mcp_II,
        /// nonconv_l1_I, nonconv_l1_II, nonconv_mcp_I, nonconv_mcp_II.
        name: String,
        /// 'synthetic' or a path to a LIBSVM file.
        #[arg(long, default_value = "synthetic")]
        data: String,
        /// Keep only the first N rows of the dataset.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        budget: u64,
        #[arg(long, default_value_t = 100)]
        cadence: u64,
    },
    /// Compute the reference minimum F* for a configuration.
    Reference {
        #[arg(long)]
        config: PathBuf,
        /// Write the reference report to this path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the Lyapunov and residual certificates of an emitted trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        /// Summary JSON; defaults to the trace's sibling
        /// `<name>.summary.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> piag_cli::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir.display().to_string();
            }
            let exec = runner::execute(&cfg)?;
            let dir = PathBuf::from(&cfg.output.dir);
            let (trace_path, summary_path) = runner::emit_outputs(&exec, &dir)?;
            println!(
                "{}: {} iterations, termination {}, final F = {:.12e}",
                exec.summary.name,
                exec.summary.iterations,
                exec.summary.termination,
                exec.summary.final_f
            );
            println!(
                "lyapunov violations: {} / {} checked; residual bound violations: {} / {} checked",
                exec.summary.lyapunov_violations,
                exec.summary.lyapunov_checked,
                exec.summary.residual_bound_violations,
                exec.summary.residual_checked
            );
            println!("trace:   {}", trace_path.display());
            println!("summary: {}", summary_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset {
            name,
            data,
            subsample,
            out,
            budget,
            cadence,
        } => {
            let preset = Preset::parse(&name).map_err(|e| {
                piag_cli::CliError::Config(format!("{e}; valid names: {PRESET_NAMES:?}"))
            })?;
            let source = if data == "synthetic" {
                DataSource::default()
            } else {
                DataSource::Libsvm(PathBuf::from(data))
            };
            let outcome = piag_cli::presets::run_preset(
                preset,
                &source,
                subsample.or(Some(PRESET_SUBSAMPLE)),
                budget,
                cadence,
                out.as_deref(),
            )?;
            println!(
                "{name}: final F fixed = {:.12e}, line search = {:.12e}",
                outcome.fixed.summary.final_f, outcome.linesearch.summary.final_f
            );
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reference { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let built = runner::build_problem(&cfg)?;
            let sol = piag::reference_prox_grad(
                &built.problem,
                runner::REFERENCE_TOL,
                runner::REFERENCE_MAX_ITER,
            )?;
            println!(
                "F* = {:.17e} after {} iterations (residual {:.3e}, fixed point: {})",
                sol.f_star, sol.iterations, sol.residual, sol.fixed_point
            );
            if let Some(path) = out {
                let report = serde_json::json!({
                    "f_star": sol.f_star,
                    "iterations": sol.iterations,
                    "residual": sol.residual,
                    "fixed_point": sol.fixed_point,
                    "x": sol.x,
                });
                std::fs::write(&path, format!("{:#}\n", report))
                    .map_err(|e| piag_cli::CliError::Io { path, source: e })?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { trace, summary } => {
            let summary = summary.unwrap_or_else(|| {
                let name = trace
                    .file_name()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .replace(".trace.csv", ".summary.json");
                trace.with_file_name(name)
            });
            let rows = traceio::load_trace(&trace)?;
            let summ = traceio::load_summary(&summary)?;
            let report = verify::verify(&rows, &summ)?;
            println!(
                "rows: {} (consecutive: {})",
                report.rows, report.consecutive
            );
            println!(
                "lyapunov descent: {} violations / {} checked",
                report.lyapunov_violations, report.lyapunov_checked
            );
            println!(
                "residual bound:   {} violations / {} checked",
                report.residual_violations, report.residual_checked
            );
            println!("xi reconstruction mismatches: {}", report.xi_mismatches);
            if report.violations() > 0 {
                Err(piag_cli::CliError::VerificationFailed(report.violations()))
            } else {
                println!("OK");
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}
