//! Experiment dispatch: builds the inputs from a config, fans paths out
//! over a worker pool, aggregates, writes CSV/JSON and returns a verdicted
//! report.
//!
//! Determinism: path `i` always uses RNG stream `i` of the configured seed,
//! aggregation folds results in path order, and the bootstrap is seeded
//! from the experiment seed, so a `(config, seed)` pair reproduces its
//! outputs byte for byte regardless of worker count.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use itocalc::bv2d::{variation, Rect, RefinementPolicy};
use itocalc::itoformula::{
    coupled_level_spacing, eval_path, krylov_check, residual_convergence, ConvergenceOptions,
    Driver, EvalOptions, FormulaVariant, TermBreakdown,
};
use itocalc::localtime::{occupation_check, FieldOptions, LevelGrid};
use itocalc::mollifier::{self, convergence_report, DerivativeTargets, Direction};
use itocalc::pathsim::{simulate_bm_stream, simulate_ito, TimeGrid};

use crate::builtins;
use crate::config::{
    ExperimentConfig, OutputFormat, ProcessConfig, SurfaceConfig, VariantName,
};
use crate::report::{bootstrap_ci_mean, Report};
use crate::HarnessError;

/// Environment variable bounding the rayon worker count.
pub const WORKERS_ENV: &str = "ITOCALC_WORKERS";

/// Applies `ITOCALC_WORKERS` to the global pool; call once at startup.
pub fn init_workers() {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                // fails harmlessly if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn driver_from(process: &ProcessConfig) -> Result<Driver, HarnessError> {
    match process {
        ProcessConfig::Bm => Ok(Driver::BrownianMotion),
        ProcessConfig::Ito { .. } => {
            let (spec, n_bound) = process.build_ito()?;
            Ok(Driver::ItoProcess { spec, n_bound })
        }
    }
}

fn variant_from(
    name: Option<VariantName>,
    fs: &itocalc::itoformula::FunctionSpec,
    process: &ProcessConfig,
) -> FormulaVariant {
    match name {
        Some(VariantName::Semimartingale) => FormulaVariant::Semimartingale,
        Some(VariantName::Curve) => FormulaVariant::Curve,
        Some(VariantName::CurveJump) => FormulaVariant::CurveJump,
        Some(VariantName::ItoProcess) => FormulaVariant::ItoProcess,
        None => {
            if matches!(process, ProcessConfig::Ito { .. }) {
                FormulaVariant::ItoProcess
            } else if fs.curve().is_some() && !fs.variants.semimartingale {
                FormulaVariant::Curve
            } else {
                FormulaVariant::Semimartingale
            }
        }
    }
}

struct OutputSink {
    dir: PathBuf,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl OutputSink {
    fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir)?;
        Ok(OutputSink { dir, format: cfg.format(), written: Vec::new() })
    }

    fn write_csv(&mut self, name: &str, body: &str) -> Result<(), HarnessError> {
        if self.format.wants_csv() {
            let path = self.dir.join(name);
            fs::write(&path, body)?;
            self.written.push(path);
        }
        Ok(())
    }

    fn write_report(&mut self, report: &mut Report) -> Result<(), HarnessError> {
        report.outputs = self.written.clone();
        if self.format.wants_json() {
            let path = self.dir.join("report.json");
            report.outputs.push(path.clone());
            fs::write(&path, report.to_json())?;
        }
        Ok(())
    }
}

/// Runs one experiment end to end.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let started = Instant::now();
    let mut report = Report::new(cfg.kind_name(), cfg.to_json_value(), cfg.seed());
    let mut sink = OutputSink::new(cfg)?;

    match cfg {
        ExperimentConfig::FormulaCheck {
            function,
            variant,
            process,
            n_steps,
            n_paths,
            horizon,
            level_spacing,
            seed,
            tolerance,
            ..
        } => {
            let fs = builtins::builtin(function)?;
            let driver = driver_from(process)?;
            let variant = variant_from(*variant, &fs, process);
            let opts = EvalOptions::default();
            let results: Result<Vec<TermBreakdown>, _> = (0..*n_paths)
                .into_par_iter()
                .map(|i| {
                    eval_path(
                        &fs,
                        &driver,
                        variant,
                        *n_steps,
                        *level_spacing,
                        *horizon,
                        *seed,
                        i as u64,
                        &opts,
                    )
                })
                .collect();
            let results = results?;

            let mut csv = String::from(
                "path,lhs,term_dt,term_dx,term_lap,term_boundary,term_2d,term_curve,residual,normalized\n",
            );
            let mut normalized = Vec::with_capacity(results.len());
            for (i, bd) in results.iter().enumerate() {
                normalized.push(bd.normalized_residual());
                csv.push_str(&format!(
                    "{i},{},{},{},{},{},{},{},{},{}\n",
                    bd.lhs,
                    bd.term_dt,
                    bd.term_dx,
                    bd.term_lap,
                    bd.term_boundary,
                    bd.term_2d,
                    bd.term_curve,
                    bd.residual,
                    bd.normalized_residual()
                ));
            }
            sink.write_csv("formula_check.csv", &csv)?;

            let (mean, lo, hi) = bootstrap_ci_mean(&normalized, 1000, *seed);
            report.check_le("mean_normalized_residual", mean, *tolerance);
            report.with_ci(0.5 * (hi - lo));
            let max = normalized.iter().cloned().fold(0.0, f64::max);
            report.info("max_normalized_residual", max);
            report.info("n_paths", results.len() as f64);
        }

        ExperimentConfig::Occupation {
            g,
            process,
            n_steps,
            n_paths,
            horizon,
            level_spacing,
            seed,
            tolerance,
            pass_share,
            ..
        } => {
            let g_fn = builtins::integrand_builtin(g)?;
            let grid = TimeGrid::new(*horizon, *n_steps)?;
            let ito = match process {
                ProcessConfig::Bm => None,
                ProcessConfig::Ito { .. } => Some(process.build_ito()?.0),
            };
            let rows: Result<Vec<_>, HarnessError> = (0..*n_paths)
                .into_par_iter()
                .map(|i| {
                    let path = match &ito {
                        None => simulate_bm_stream(&grid, *seed, i as u64),
                        Some(spec) => simulate_ito(spec, &grid, *seed, i as u64)?,
                    };
                    let lg = LevelGrid::covering(&path, *level_spacing);
                    Ok(occupation_check(&*g_fn, &path, &lg, &FieldOptions::default()))
                })
                .collect();
            let rows = rows?;

            let mut csv = String::from("path,lhs,rhs,rel_error\n");
            for (i, c) in rows.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{}\n", c.lhs, c.rhs, c.rel_error));
            }
            sink.write_csv("occupation.csv", &csv)?;

            let within = rows.iter().filter(|c| c.rel_error <= *tolerance).count();
            let share = within as f64 / rows.len() as f64;
            let mean_rel = rows.iter().map(|c| c.rel_error).sum::<f64>() / rows.len() as f64;
            report.check_ge("share_within_tolerance", share, *pass_share);
            report.info("mean_rel_error", mean_rel);
            report.info(
                "max_rel_error",
                rows.iter().map(|c| c.rel_error).fold(0.0, f64::max),
            );
        }

        ExperimentConfig::Krylov {
            functions,
            n_bound,
            t,
            process,
            n_steps,
            n_paths,
            seed,
            ..
        } => {
            let process = process
                .clone()
                .unwrap_or_else(|| ProcessConfig::unit_ito(*n_bound));
            let (spec, _) = process.build_ito()?;
            let mut csv = String::from("function,lhs_mean,lhs_ci_half,rhs,ratio,degenerate\n");
            let mut max_ratio: f64 = 0.0;
            let mut all_ok = true;
            for name in functions {
                let f = builtins::integrand_builtin(name)?;
                let rep = krylov_check(&*f, &spec, *n_bound, *t, *n_paths, *n_steps, *seed)?;
                let ratio = rep.ratio.unwrap_or(f64::NAN);
                csv.push_str(&format!(
                    "{name},{},{},{},{},{}\n",
                    rep.lhs_mean, rep.lhs_ci_half, rep.rhs, ratio, rep.degenerate
                ));
                if let Some(r) = rep.ratio {
                    max_ratio = max_ratio.max(r);
                    report.info(&format!("ratio_{name}"), r);
                } else {
                    report.info(&format!("ratio_{name}"), f64::NAN);
                }
                all_ok &= !rep.inconsistent;
                all_ok &= rep.ratio.map(f64::is_finite).unwrap_or(true);
            }
            sink.write_csv("krylov.csv", &csv)?;
            report.info("max_ratio", max_ratio);
            report.check_bool("ratios_finite_and_consistent", all_ok);
        }

        ExperimentConfig::Variation { surface, rect, tolerance, .. } => {
            let surf = match surface {
                SurfaceConfig::Builtin(name) => builtins::surface_builtin(name)?,
                SurfaceConfig::GridFile(path) => builtins::surface_from_grid_file(path)?,
            };
            let r = Rect::new(rect[0], rect[1], rect[2], rect[3])?;
            // 1e-6 unless configured: surfaces with kink lines need a few
            // million cells per 10x of tolerance, and the cell budget is
            // the hard limit
            let policy = RefinementPolicy {
                tolerance: Some(tolerance.unwrap_or(1e-6)),
                ..RefinementPolicy::default()
            };
            let v = variation(&surf, &r, &policy);
            let mut csv = String::from("cells,partition_variation\n");
            for (cells, value) in &v.refinement_trace {
                csv.push_str(&format!("{cells},{value}\n"));
            }
            sink.write_csv("variation.csv", &csv)?;
            report.info("variation", v.value);
            report.check_bool("converged", v.converged);
            report.check_bool("finite", v.value.is_finite());
            report.info("tolerance_used", v.tolerance);
            // refinement monotonicity is an invariant of the trace
            let monotone = v
                .refinement_trace
                .windows(2)
                .all(|w| w[1].1 >= w[0].1 - 1e-12 * (1.0 + w[0].1.abs()));
            report.check_bool("trace_nondecreasing", monotone);
        }

        ExperimentConfig::MollifierReport { target, ns, points, .. } => {
            let (surface, targets) = mollifier_target(target)?;
            let rows = convergence_report(
                &surface,
                &targets,
                ns,
                points,
                Direction::Left,
                Direction::Left,
            )?;
            let mut buf = Vec::new();
            mollifier::write_report_csv(&rows, &mut buf)?;
            sink.write_csv("mollifier.csv", &String::from_utf8_lossy(&buf))?;

            // per point: the value error at the largest n must not exceed
            // the coarsest one (allowing an absolute floor for exact cases)
            let mut shrinks = true;
            let mut worst_final = 0.0_f64;
            for &(s, x) in points {
                let at_point: Vec<_> =
                    rows.iter().filter(|r| r.s == s && r.x == x).collect();
                if let (Some(first), Some(last)) = (at_point.first(), at_point.last()) {
                    shrinks &= last.err_f <= first.err_f + 1e-9;
                    worst_final = worst_final.max(last.err_f);
                }
            }
            report.check_bool("value_error_shrinks", shrinks);
            report.info("worst_final_err_f", worst_final);
            report.info("kernel_normalization", mollifier::bump_normalization());
        }

        ExperimentConfig::Convergence {
            function,
            variant,
            process,
            steps,
            n_paths,
            horizon,
            level_spacing,
            couple_level_spacing,
            seed,
            tolerance,
            ..
        } => {
            let fs = builtins::builtin(function)?;
            let driver = driver_from(process)?;
            let variant = variant_from(*variant, &fs, process);
            let opts = ConvergenceOptions {
                horizon: *horizon,
                seed: *seed,
                level_spacing_ref: *level_spacing,
                couple_level_spacing: *couple_level_spacing,
                ..Default::default()
            };
            let table = parallel_residual_convergence(&fs, &driver, variant, steps, *n_paths, &opts)?;
            let mut csv = String::from("n_steps,level_spacing,mean_normalized_residual\n");
            for row in &table.rows {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row.n_steps, row.level_spacing, row.mean_normalized_residual
                ));
            }
            sink.write_csv("convergence.csv", &csv)?;
            report.info("slope_in_dt", table.slope_in_dt);
            report.check_bool("strictly_decreasing", table.strictly_decreasing());
            let final_mean = table
                .rows
                .last()
                .map(|r| r.mean_normalized_residual)
                .unwrap_or(f64::NAN);
            match tolerance {
                Some(tol) => {
                    report.check_le("final_mean_normalized_residual", final_mean, *tol);
                }
                None => report.info("final_mean_normalized_residual", final_mean),
            }
        }
    }

    report.wall_time_s = started.elapsed().as_secs_f64();
    sink.write_report(&mut report)?;
    Ok(report)
}

/// Parallel version of [`residual_convergence`]: identical numbers, paths
/// fanned out per level.
pub fn parallel_residual_convergence(
    fs: &itocalc::itoformula::FunctionSpec,
    driver: &Driver,
    variant: FormulaVariant,
    steps: &[usize],
    n_paths: usize,
    opts: &ConvergenceOptions,
) -> Result<itocalc::itoformula::RateTable, HarnessError> {
    if n_paths <= 8 {
        return Ok(residual_convergence(fs, driver, variant, steps, n_paths, opts)?);
    }
    let eval_opts = EvalOptions { field: opts.field };
    let mut rows = Vec::with_capacity(steps.len());
    for &n_steps in steps {
        let spacing = coupled_level_spacing(opts, n_steps);
        let residuals: Result<Vec<f64>, itocalc::ItoFormulaError> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                eval_path(
                    fs,
                    driver,
                    variant,
                    n_steps,
                    spacing,
                    opts.horizon,
                    opts.seed,
                    i as u64,
                    &eval_opts,
                )
                .map(|bd| bd.normalized_residual())
            })
            .collect();
        let residuals = residuals?;
        rows.push(itocalc::itoformula::RateRow {
            n_steps,
            level_spacing: spacing,
            mean_normalized_residual: residuals.iter().sum::<f64>() / n_paths as f64,
        });
    }
    // refit the slope exactly as the sequential version does
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_normalized_residual > 0.0)
        .map(|r| {
            (
                (opts.horizon / r.n_steps as f64).ln(),
                r.mean_normalized_residual.ln(),
            )
        })
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        cov / var
    } else {
        f64::NAN
    };
    Ok(itocalc::itoformula::RateTable { rows, slope_in_dt: slope })
}

/// Mollifier targets with their one-sided reference derivatives.
fn mollifier_target(name: &str) -> Result<(itocalc::Surface2D, DerivativeTargets), HarnessError> {
    use std::f64::consts::PI;
    match name {
        "sine" => Ok((
            itocalc::Surface2D::analytic(|s, x| (PI * s).sin() * (PI * x).sin()),
            DerivativeTargets {
                f: Box::new(|s, x| (PI * s).sin() * (PI * x).sin()),
                dt: Box::new(|s, x| PI * (PI * s).cos() * (PI * x).sin()),
                dx: Box::new(|s, x| PI * (PI * s).sin() * (PI * x).cos()),
            },
        )),
        "x-plus" => Ok((
            itocalc::Surface2D::analytic(|_, x| x.max(0.0)),
            DerivativeTargets {
                f: Box::new(|_, x| x.max(0.0)),
                dt: Box::new(|_, _| 0.0),
                // left derivative of x+ jumps at 0 and is 0 there
                dx: Box::new(|_, x| if x > 0.0 { 1.0 } else { 0.0 }),
            },
        )),
        "const" => Ok((
            itocalc::Surface2D::constant(1.0),
            DerivativeTargets {
                f: Box::new(|_, _| 1.0),
                dt: Box::new(|_, _| 0.0),
                dx: Box::new(|_, _| 0.0),
            },
        )),
        other => Err(HarnessError::UnknownName(other.to_string())),
    }
}

/// Renders metrics as the one-line-per-criterion format used on stdout.
pub fn print_summary(report: &Report) {
    for line in report.summary_lines() {
        println!("{line}");
    }
}
