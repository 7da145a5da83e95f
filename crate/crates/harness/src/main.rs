//! `itocalc` CLI: Monte Carlo experiments over the stochastic-calculus
//! library. Exit code 0 means every declared tolerance passed, 1 means a
//! tolerance failed, 2 means a usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use itocalc_harness::config::{
    ExperimentConfig, OutputFormat, ProcessConfig, SurfaceConfig,
};
use itocalc_harness::runner::{self, WORKERS_ENV};

#[derive(Parser)]
#[command(
    name = "itocalc",
    version,
    about = "Monte Carlo verification of stochastic-calculus identities: \
             local times, two-parameter Stieltjes integrals, Ito-type formula residuals",
    after_help = format!("Worker count is taken from the {WORKERS_ENV} environment variable.")
)]
struct Cli {
    /// JSON experiment config; defaults are built in per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override the number of time steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Output directory (default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Formula residuals for a built-in function spec.
    Check {
        /// Built-in function name.
        #[arg(long, default_value = "tanaka")]
        function: String,
        /// Mean normalized-residual tolerance. The default matches the
        /// default grid sizes; finer grids support tighter bounds.
        #[arg(long, default_value_t = 0.08)]
        tolerance: f64,
    },
    /// Occupation-times identity, pathwise.
    Occupation {
        /// Integrand name (one | x2 | sin-pi-x | indicator-positive | tx).
        #[arg(long, default_value = "x2")]
        g: String,
        /// Pathwise relative-error tolerance.
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// Krylov-type L2 bound for a family of integrands.
    Krylov {
        #[arg(long, default_value_t = 2.0)]
        n_bound: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Two-parameter variation of a surface.
    Variation {
        /// Built-in surface name (paper-example-1 | product | step | space-only | sine).
        #[arg(long, default_value = "paper-example-1")]
        surface: String,
        /// Grid file instead of a builtin.
        #[arg(long, conflicts_with = "surface")]
        grid_file: Option<PathBuf>,
        /// Rectangle s_lo s_hi x_lo x_hi.
        #[arg(long, num_args = 4, default_values_t = [0.0, 2.0, 0.0, 2.0])]
        rect: Vec<f64>,
    },
    /// Mollifier convergence report.
    Mollifier {
        /// Target name (sine | x-plus | const).
        #[arg(long, default_value = "sine")]
        target: String,
    },
    /// Residual convergence across dyadic refinement levels.
    Converge {
        #[arg(long, default_value = "tanaka")]
        function: String,
    },
}

fn default_config(cmd: &Command) -> ExperimentConfig {
    match cmd {
        Command::Check { function, tolerance } => ExperimentConfig::FormulaCheck {
            function: function.clone(),
            variant: None,
            process: ProcessConfig::Bm,
            n_steps: 1 << 14,
            n_paths: 256,
            horizon: 1.0,
            level_spacing: 1.0 / 128.0,
            seed: 7,
            tolerance: *tolerance,
            out_dir: None,
            format: OutputFormat::Both,
        },
        Command::Occupation { g, tolerance } => ExperimentConfig::Occupation {
            g: g.clone(),
            process: ProcessConfig::Bm,
            n_steps: 1 << 14,
            n_paths: 256,
            horizon: 1.0,
            level_spacing: 1.0 / 128.0,
            seed: 11,
            tolerance: *tolerance,
            pass_share: 0.95,
            out_dir: None,
            format: OutputFormat::Both,
        },
        Command::Krylov { n_bound, t } => ExperimentConfig::Krylov {
            functions: vec![
                "one".into(),
                "x2".into(),
                "sin-pi-x".into(),
                "indicator-positive".into(),
            ],
            n_bound: *n_bound,
            t: *t,
            process: None,
            n_steps: 1 << 12,
            n_paths: 2048,
            seed: 13,
            out_dir: None,
            format: OutputFormat::Both,
        },
        Command::Variation { surface, grid_file, rect } => ExperimentConfig::Variation {
            surface: match grid_file {
                Some(path) => SurfaceConfig::GridFile(path.clone()),
                None => SurfaceConfig::Builtin(surface.clone()),
            },
            rect: [rect[0], rect[1], rect[2], rect[3]],
            tolerance: None,
            seed: 0,
            out_dir: None,
            format: OutputFormat::Both,
        },
        Command::Mollifier { target } => ExperimentConfig::MollifierReport {
            target: target.clone(),
            ns: vec![4, 8, 16, 32, 64],
            points: vec![(0.7, 0.2), (1.5, -0.4)],
            seed: 0,
            out_dir: None,
            format: OutputFormat::Both,
        },
        Command::Converge { function } => ExperimentConfig::Convergence {
            function: function.clone(),
            variant: None,
            process: ProcessConfig::Bm,
            steps: vec![1 << 10, 1 << 12, 1 << 14],
            n_paths: 128,
            horizon: 1.0,
            level_spacing: 1.0 / 128.0,
            couple_level_spacing: true,
            seed: 3,
            tolerance: None,
            out_dir: None,
            format: OutputFormat::Both,
        },
    }
}

fn expected_kind(cmd: &Command) -> &'static str {
    match cmd {
        Command::Check { .. } => "formula-check",
        Command::Occupation { .. } => "occupation",
        Command::Krylov { .. } => "krylov",
        Command::Variation { .. } => "variation",
        Command::Mollifier { .. } => "mollifier-report",
        Command::Converge { .. } => "convergence",
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            if cfg.kind_name() != expected_kind(&cli.command) {
                return Err(format!(
                    "config kind '{}' does not match subcommand '{}'",
                    cfg.kind_name(),
                    expected_kind(&cli.command)
                ));
            }
            cfg
        }
        None => default_config(&cli.command),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(paths) = cli.paths {
        cfg.set_paths(paths);
    }
    if let Some(steps) = cli.steps {
        cfg.set_steps(steps);
    }
    if let Some(out) = &cli.out {
        cfg.set_out_dir(out.clone());
    }
    if let Some(format) = cli.format {
        cfg.set_format(format);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    runner::init_workers();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match runner::run(&cfg) {
        Ok(report) => {
            runner::print_summary(&report);
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
