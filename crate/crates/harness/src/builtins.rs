//! Built-in function specs, surfaces and integrands for experiments.
//!
//! Names accepted by [`builtin`]:
//!
//! * `tanaka` - `f = |x|`, the prototype identity with a gradient atom at 0.
//! * `square` - `f = x^2`, the classical smooth case.
//! * `paper-example-1` (alias `sine-wedge`) - `f = (sin(pi x) sin(pi t))^+`,
//!   a left gradient of bounded two-parameter variation jumping across the
//!   integer grid lines.
//! * `paper-example-2` (alias `cbrt-sine-wedge`) -
//!   `f = cbrt(sin(pi x)) (sin(pi x) sin(pi t))^+`, continuous gradient but
//!   second derivative blowing up near integer `x`.
//! * `curve-kink` - `f = (x - l(t))^+` with `l(t) = 0.2 sin t`, a gradient
//!   jump of size 1 across a moving curve.
//! * `heat-smooth` - a Gaussian kernel in `(1 + t, x)`, smooth everywhere.

use std::f64::consts::PI;

use itocalc::bv2d::{grid::GridData, JumpSet, Surface2D};
use itocalc::itoformula::{BvPart, FunctionSpec, SmoothPart, VariantFlags};
use itocalc::pathsim::Curve;

use crate::HarnessError;

fn sgn_left(y: f64) -> f64 {
    if y <= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Index of the open unit cell `(i, i+1)` seen when approaching `t` from
/// below: `floor(t)` off the integers, `t - 1` on them.
fn left_cell(t: f64) -> f64 {
    let fl = t.floor();
    if t == fl {
        fl - 1.0
    } else {
        fl
    }
}

fn integer_lines(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

pub fn tanaka() -> FunctionSpec {
    FunctionSpec::new("tanaka", |_, x| x.abs(), |_, _| 0.0, |_, x| sgn_left(x))
        .with_bv(BvPart::new(
            |_, x| x.abs(),
            Surface2D::analytic(|_, x| sgn_left(x)).with_jumps(JumpSet::x_only(vec![0.0])),
        ))
        .with_variants(VariantFlags {
            semimartingale: true,
            curve_ls: true,
            curve_jump: false,
            ito_process: true,
        })
}

pub fn square() -> FunctionSpec {
    FunctionSpec::new("square", |_, x| x * x, |_, _| 0.0, |_, x| 2.0 * x)
        .with_smooth(SmoothPart::new(|_, x| x * x, |_, x| 2.0 * x, |_, _| 2.0))
        .with_variants(VariantFlags {
            semimartingale: true,
            curve_ls: false,
            curve_jump: false,
            ito_process: true,
        })
}

/// `f(t, x) = (sin(pi x) sin(pi t))^+`.
///
/// The left gradient is `pi cos(pi x) sin(pi t)` on the set where the sine
/// product is positive (the unit cells with even index sum) and 0 elsewhere;
/// it jumps across every integer line in `x` and turns on and off across
/// integer lines in `t`.
pub fn sine_wedge() -> FunctionSpec {
    let f = |t: f64, x: f64| (PI * x).sin() * (PI * t).sin();
    FunctionSpec::new(
        "paper-example-1",
        move |t, x| f(t, x).max(0.0),
        move |t, x| {
            if f(t, x) > 0.0 {
                PI * (PI * x).sin() * (PI * t).cos()
            } else {
                0.0
            }
        },
        move |t, x| {
            if f(t, x) > 0.0 {
                PI * (PI * x).cos() * (PI * t).sin()
            } else {
                0.0
            }
        },
    )
    .with_bv(BvPart::new(move |t, x| f(t, x).max(0.0), sine_wedge_grad_surface()))
    .with_variants(VariantFlags {
        semimartingale: true,
        curve_ls: false,
        curve_jump: false,
        ito_process: true,
    })
}

/// The left-continuous version of the `sine-wedge` gradient as a surface.
///
/// Positivity of the sine product is decided by unit-cell parity rather
/// than the floating-point sign of the product, which is garbage exactly on
/// the integer lines (`sin(pi * k)` is only zero up to rounding). The raw
/// value uses the cell containing the point, the left value the cell seen
/// from the lower left; they differ exactly on the lattice lines.
pub fn sine_wedge_grad_surface() -> Surface2D {
    Surface2D::analytic_with_left(
        |t, x| {
            let cell_sum = t.floor() + x.floor();
            if (cell_sum as i64).rem_euclid(2) == 0 {
                PI * (PI * x).cos() * (PI * t).sin()
            } else {
                0.0
            }
        },
        |t, x| {
            let cell_sum = left_cell(t) + left_cell(x);
            if (cell_sum as i64).rem_euclid(2) == 0 {
                PI * (PI * x).cos() * (PI * t).sin()
            } else {
                0.0
            }
        },
    )
    .with_jumps(JumpSet::new(integer_lines(-2, 6), integer_lines(-12, 12)))
}

/// `f(t, x) = cbrt(sin(pi x)) (sin(pi x) sin(pi t))^+`.
///
/// On the positive cells the left gradient collapses to
/// `(4 pi / 3) cos(pi x) cbrt(sin(pi x)) sin(pi t)`, which extends
/// continuously by 0 across the cell boundaries; the second derivative
/// blows up near integer `x`, so everything sits in the BV part.
pub fn cbrt_sine_wedge() -> FunctionSpec {
    let p = |t: f64, x: f64| (PI * x).sin() * (PI * t).sin();
    let grad = move |t: f64, x: f64| {
        if p(t, x) > 0.0 {
            (4.0 * PI / 3.0) * (PI * x).cos() * (PI * x).sin().cbrt() * (PI * t).sin()
        } else {
            0.0
        }
    };
    FunctionSpec::new(
        "paper-example-2",
        move |t, x| (PI * x).sin().cbrt() * p(t, x).max(0.0),
        move |t, x| {
            if p(t, x) > 0.0 {
                let s = (PI * x).sin();
                PI * s.cbrt() * s * (PI * t).cos()
            } else {
                0.0
            }
        },
        grad,
    )
    .with_bv(BvPart::new(
        move |t, x| (PI * x).sin().cbrt() * p(t, x).max(0.0),
        Surface2D::analytic(grad)
            .with_jumps(JumpSet::new(integer_lines(-2, 6), integer_lines(-12, 12))),
    ))
    .with_variants(VariantFlags {
        semimartingale: true,
        curve_ls: false,
        curve_jump: false,
        ito_process: true,
    })
}

/// `f(t, x) = (x - l(t))^+` with `l(t) = amplitude * sin t`.
///
/// In curve-relative coordinates the BV gradient is the time-independent
/// step `1_{y > 0}`, and the gradient jump across the curve is 1.
pub fn curve_kink(amplitude: f64) -> FunctionSpec {
    let l = move |t: f64| amplitude * t.sin();
    let dl = move |t: f64| amplitude * t.cos();
    let on_curve_free = amplitude == 0.0;
    FunctionSpec::new(
        "curve-kink",
        move |t, x| (x - l(t)).max(0.0),
        move |t, x| if x - l(t) > 0.0 { -dl(t) } else { 0.0 },
        move |t, x| if x - l(t) > 0.0 { 1.0 } else { 0.0 },
    )
    .with_bv(BvPart::new(
        move |t, x| (x - l(t)).max(0.0),
        Surface2D::analytic(|_, y| if y > 0.0 { 1.0 } else { 0.0 })
            .with_jumps(JumpSet::x_only(vec![0.0])),
    ))
    .with_curve(Curve::with_total_variation(l, move |t| {
        // A sin is monotone between the peaks at pi/2 + k pi; sum the
        // monotone pieces
        if amplitude == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut prev = 0.0;
        let mut k = 0;
        loop {
            let peak = PI / 2.0 + k as f64 * PI;
            if peak >= t {
                break;
            }
            acc += (amplitude * peak.sin() - prev).abs();
            prev = amplitude * peak.sin();
            k += 1;
        }
        acc + (amplitude * t.sin() - prev).abs()
    }))
    .with_jump(|_| 1.0)
    .with_variants(VariantFlags {
        semimartingale: on_curve_free,
        curve_ls: true,
        curve_jump: true,
        ito_process: on_curve_free,
    })
}

/// Gaussian heat kernel at time `1 + t`: smooth in both variables and a
/// solution of the backward-time heat equation, a convenient smooth case
/// with genuine time dependence.
pub fn heat_smooth() -> FunctionSpec {
    let f = |t: f64, x: f64| {
        let v = 1.0 + t;
        (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
    };
    let lap = move |t: f64, x: f64| {
        let v = 1.0 + t;
        (x * x / v - 1.0) / v * f(t, x)
    };
    FunctionSpec::new(
        "heat-smooth",
        f,
        move |t, x| 0.5 * lap(t, x),
        move |t, x| -x / (1.0 + t) * f(t, x),
    )
    .with_smooth(SmoothPart::new(f, move |t, x| -x / (1.0 + t) * f(t, x), lap))
    .with_variants(VariantFlags {
        semimartingale: true,
        curve_ls: false,
        curve_jump: false,
        ito_process: true,
    })
}

/// Looks up a function spec by name (aliases listed at module level).
pub fn builtin(name: &str) -> Result<FunctionSpec, HarnessError> {
    match name {
        "tanaka" => Ok(tanaka()),
        "square" => Ok(square()),
        "paper-example-1" | "sine-wedge" => Ok(sine_wedge()),
        "paper-example-2" | "cbrt-sine-wedge" => Ok(cbrt_sine_wedge()),
        "curve-kink" => Ok(curve_kink(0.2)),
        "heat-smooth" => Ok(heat_smooth()),
        other => Err(HarnessError::UnknownName(other.to_string())),
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "tanaka",
    "square",
    "paper-example-1",
    "paper-example-2",
    "curve-kink",
    "heat-smooth",
];

/// Surfaces for variation experiments.
pub fn surface_builtin(name: &str) -> Result<Surface2D, HarnessError> {
    match name {
        "paper-example-1" | "sine-wedge-grad" => Ok(sine_wedge_grad_surface()),
        "product" => Ok(Surface2D::analytic(|s, x| s * x)),
        "step" => Ok(Surface2D::analytic_with_left(
            |s, x| if s >= 0.5 && x >= 0.5 { 1.0 } else { 0.0 },
            |s, x| if s > 0.5 && x > 0.5 { 1.0 } else { 0.0 },
        )
        .with_jumps(JumpSet::new(vec![0.5], vec![0.5]))),
        "space-only" => Ok(Surface2D::analytic(|_, x| (37.0 * x).sin())),
        "sine" => Ok(Surface2D::analytic(|s, x| s.sin() * x.sin())),
        other => Err(HarnessError::UnknownName(other.to_string())),
    }
}

/// Loads a surface from a plain-text grid file.
pub fn surface_from_grid_file(path: &std::path::Path) -> Result<Surface2D, HarnessError> {
    Ok(Surface2D::from_grid(GridData::read_file(path)?))
}

/// Integrands for occupation and Krylov experiments.
pub fn integrand_builtin(name: &str) -> Result<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>, HarnessError> {
    match name {
        "one" => Ok(Box::new(|_, _| 1.0)),
        "x2" => Ok(Box::new(|_, x| x * x)),
        "sin-pi-x" => Ok(Box::new(|_, x| (PI * x).sin())),
        "indicator-positive" => Ok(Box::new(|_, x| if x > 0.0 { 1.0 } else { 0.0 })),
        "tx" => Ok(Box::new(|t, x| t * x)),
        other => Err(HarnessError::UnknownName(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtin_names_resolve() {
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_ok(), "missing builtin {name}");
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn sine_wedge_gradient_matches_display() {
        let fs = sine_wedge();
        // inside a positive cell (i + j even) the gradient is the product
        let (t, x) = (0.3, 0.4);
        assert!((fs.grad_left(t, x) - PI * (PI * x).cos() * (PI * t).sin()).abs() < 1e-14);
        // inside a negative cell it vanishes
        assert_eq!(fs.grad_left(0.3, 1.4), 0.0);
    }

    #[test]
    fn sine_wedge_left_limits_on_integer_lines() {
        let surf = sine_wedge_grad_surface();
        // approaching x = 1 from below inside t in (0,1): cell (0,0) is
        // positive, so the left value is the analytic product at x = 1
        let t = 0.3;
        let want = PI * (PI * 1.0).cos() * (PI * t).sin();
        assert!((surf.eval_left(t, 1.0) - want).abs() < 1e-12);
        // the raw value at x = 1 is 0 (the product vanishes)
        assert_eq!(surf.eval(t, 1.0), 0.0);
        // approaching (1, 1) diagonally lands in the positive cell (0,0)
        let want_t1 = PI * (PI * 1.0).cos() * (PI * 1.0).sin();
        assert!((surf.eval_left(1.0, 1.0) - want_t1).abs() < 1e-12);
    }

    #[test]
    fn cbrt_sine_wedge_gradient_is_continuous_across_lines() {
        let fs = cbrt_sine_wedge();
        // gradient tends to 0 as x approaches an integer from either side,
        // at cube-root speed
        for x in [1.0 - 1e-9, 1.0 + 1e-9, 2.0 - 1e-9, 2.0 + 1e-9] {
            assert!(fs.grad_left(0.5, x).abs() < 0.05, "grad at {x}");
        }
        assert!(fs.grad_left(0.5, 0.999).abs() > fs.grad_left(0.5, 1.0 - 1e-9).abs());
    }

    #[test]
    fn curve_kink_pieces_fit() {
        let fs = curve_kink(0.2);
        let l = |t: f64| 0.2 * t.sin();
        let (t, x) = (0.8, 0.5);
        assert!((fs.f(t, x) - (x - l(t)).max(0.0)).abs() < 1e-15);
        assert_eq!(fs.jump_at(t), Some(1.0));
        assert!(fs.curve().is_some());
        // curve total variation on [0, pi] is 2 * 0.2
        let tv = fs.curve().unwrap().total_variation(PI);
        assert!((tv - 0.4).abs() < 1e-12, "tv {tv}");
    }

    #[test]
    fn heat_smooth_solves_its_heat_equation() {
        let fs = heat_smooth();
        let sp = fs.smooth().unwrap();
        for (t, x) in [(0.0, 0.3), (0.7, -1.2), (1.5, 0.0)] {
            assert!((fs.dt_left(t, x) - 0.5 * sp.lap_left(t, x)).abs() < 1e-14);
        }
    }
}
