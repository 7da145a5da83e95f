//! Diagnostics for function specs: do the declared derivative fields match
//! one-sided finite differences of `f`, does the smooth/BV split add up,
//! and is the BV gradient of finite two-parameter variation?

use itocalc::bv2d::{variation, Rect, RefinementPolicy};
use itocalc::itoformula::FunctionSpec;

/// Sample box for the finite-difference sweep.
#[derive(Debug, Clone, Copy)]
pub struct SampleGrid {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    pub nt: usize,
    pub nx: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { t_range: (0.05, 1.0), x_range: (-1.5, 1.5), nt: 9, nx: 13 }
    }
}

#[derive(Debug, Clone)]
pub struct SpecCheckFailure {
    pub check: &'static str,
    pub location: (f64, f64),
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SpecCheckReport {
    pub failures: Vec<SpecCheckFailure>,
    pub points_checked: usize,
    pub variation_value: Option<f64>,
    pub variation_converged: Option<bool>,
}

impl SpecCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const FD_STEP: f64 = 1e-5;
/// Sample points closer than this to a declared jump line (or the curve)
/// are skipped in the finite-difference sweep: the quotient straddles the
/// discontinuity there and says nothing about the one-sided derivative.
const JUMP_BAND: f64 = 100.0 * FD_STEP;

fn near(value: f64, lines: &[f64], band: f64) -> bool {
    lines.iter().any(|&l| (value - l).abs() < band)
}

/// Finite-difference and consistency sweep over the sample grid.
pub fn spec_check(fs: &FunctionSpec, grid: &SampleGrid) -> SpecCheckReport {
    let mut failures = Vec::new();
    let mut points = 0;
    let h = FD_STEP;
    let (s_jumps, x_jumps) = match fs.bv() {
        Some(bv) => (
            bv.surface().jumps().s_lines.clone(),
            bv.surface().jumps().x_lines.clone(),
        ),
        None => (Vec::new(), Vec::new()),
    };

    for i in 0..grid.nt {
        let t = grid.t_range.0
            + (grid.t_range.1 - grid.t_range.0) * i as f64 / (grid.nt - 1).max(1) as f64;
        for j in 0..grid.nx {
            let x = grid.x_range.0
                + (grid.x_range.1 - grid.x_range.0) * j as f64 / (grid.nx - 1).max(1) as f64;
            points += 1;

            let near_curve = fs
                .curve()
                .map(|c| (x - c.eval(t)).abs() < JUMP_BAND)
                .unwrap_or(false);
            let skip_fd = near(t, &s_jumps, JUMP_BAND) || near(x, &x_jumps, JUMP_BAND) || near_curve;

            if !skip_fd && t - h > 0.0 {
                let fd_t = (fs.f(t, x) - fs.f(t - h, x)) / h;
                let want = fs.dt_left(t, x);
                let tol = 1e-3 * (1.0 + want.abs());
                if (fd_t - want).abs() > tol {
                    failures.push(SpecCheckFailure {
                        check: "dt_left vs left difference",
                        location: (t, x),
                        detail: format!("fd {fd_t:.6e} vs declared {want:.6e}"),
                    });
                }
                let fd_x = (fs.f(t, x) - fs.f(t, x - h)) / h;
                let want = fs.grad_left(t, x);
                let tol = 1e-3 * (1.0 + want.abs());
                if (fd_x - want).abs() > tol {
                    failures.push(SpecCheckFailure {
                        check: "grad_left vs left difference",
                        location: (t, x),
                        detail: format!("fd {fd_x:.6e} vs declared {want:.6e}"),
                    });
                }
            }

            // f = f_h + f_v wherever a split is declared
            if fs.smooth().is_some() || fs.bv().is_some() {
                let fh = fs.smooth().map(|s| s.value(t, x)).unwrap_or(0.0);
                let fv = fs.bv().map(|b| b.value(t, x)).unwrap_or(0.0);
                let diff = fs.f(t, x) - fh - fv;
                if diff.abs() > 1e-10 * (1.0 + fs.f(t, x).abs()) {
                    failures.push(SpecCheckFailure {
                        check: "f = f_h + f_v",
                        location: (t, x),
                        detail: format!("off by {diff:.3e}"),
                    });
                }
                if !skip_fd {
                    let gh = fs.smooth().map(|s| s.grad(t, x)).unwrap_or(0.0);
                    let gv = fs.bv().map(|b| b.surface().eval(t, x)).unwrap_or(0.0);
                    let diff = fs.grad_left(t, x) - gh - gv;
                    if diff.abs() > 1e-8 * (1.0 + fs.grad_left(t, x).abs()) {
                        failures.push(SpecCheckFailure {
                            check: "grad_left = grad f_h + grad f_v",
                            location: (t, x),
                            detail: format!("off by {diff:.3e}"),
                        });
                    }
                }
            }
        }
    }

    // finite two-parameter variation of the BV gradient on the sample box
    let (variation_value, variation_converged) = match fs.bv() {
        Some(bv) => {
            let r = Rect::new(
                grid.t_range.0.max(0.0),
                grid.t_range.1,
                grid.x_range.0,
                grid.x_range.1,
            )
            .expect("sample grid is ordered");
            // stabilization of the raw ladder is the finiteness evidence;
            // extrapolation is counterproductive here because cusped
            // gradients (cube-root kinks) break the clean error expansion
            let policy = RefinementPolicy {
                tolerance: Some(1e-2),
                initial_level: 3,
                max_cells: 1 << 22,
                accelerate: false,
            };
            let v = variation(bv.surface(), &r, &policy);
            if !v.value.is_finite() {
                failures.push(SpecCheckFailure {
                    check: "finite variation of grad f_v",
                    location: (grid.t_range.0, grid.x_range.0),
                    detail: format!("variation estimate {}", v.value),
                });
            } else if !v.converged {
                failures.push(SpecCheckFailure {
                    check: "finite variation of grad f_v",
                    location: (grid.t_range.0, grid.x_range.0),
                    detail: format!(
                        "did not stabilize within budget (last estimate {:.6e})",
                        v.value
                    ),
                });
            }
            (Some(v.value), Some(v.converged))
        }
        None => (None, None),
    };

    SpecCheckReport { failures, points_checked: points, variation_value, variation_converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use itocalc::bv2d::{JumpSet, Surface2D};
    use itocalc::itoformula::{BvPart, FunctionSpec, VariantFlags};

    #[test]
    fn all_builtins_pass() {
        for name in builtins::BUILTIN_NAMES {
            let fs = builtins::builtin(name).unwrap();
            let report = spec_check(&fs, &SampleGrid::default());
            assert!(
                report.passed(),
                "{name}: {:?}",
                report
                    .failures
                    .iter()
                    .map(|f| format!("{} at {:?}: {}", f.check, f.location, f.detail))
                    .collect::<Vec<_>>()
            );
            if fs.bv().is_some() {
                assert_eq!(report.variation_converged, Some(true), "{name}");
            }
        }
    }

    #[test]
    fn corrupted_split_is_flagged() {
        // wrong sign on the BV part: f_h + f_v no longer reproduces f
        let sgn = |y: f64| if y <= 0.0 { -1.0 } else { 1.0 };
        let bad = FunctionSpec::new("bad-tanaka", |_, x| x.abs(), |_, _| 0.0, move |_, x| sgn(x))
            .with_bv(BvPart::new(
                |_, x| -x.abs(),
                Surface2D::analytic(move |_, x| sgn(x)).with_jumps(JumpSet::x_only(vec![0.0])),
            ))
            .with_variants(VariantFlags { semimartingale: true, ..Default::default() });
        let report = spec_check(&bad, &SampleGrid::default());
        assert!(!report.passed());
        assert!(report.failures.iter().any(|f| f.check == "f = f_h + f_v"));
    }

    #[test]
    fn wrong_derivative_is_flagged() {
        let bad = FunctionSpec::new("bad-square", |_, x| x * x, |_, _| 0.0, |_, x| 3.0 * x);
        let report = spec_check(&bad, &SampleGrid::default());
        assert!(report
            .failures
            .iter()
            .any(|f| f.check == "grad_left vs left difference"));
    }
}
