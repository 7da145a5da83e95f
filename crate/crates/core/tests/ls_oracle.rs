//! The two-parameter Stieltjes integral against an independent quadrature
//! oracle: for surfaces with a continuous mixed density `d = d2f/dsdx`,
//! `int int g df` must match `int int g * d ds dx`.
//!
//! The oracle here is a self-contained adaptive 2D Simpson rule; it shares
//! no code with the corner-sum integrator it checks.

use itocalc::bv2d::{ls_integral_2d, Rect, RefinementPolicy, Surface2D};

/// Adaptive Simpson in one variable, local to this test.
fn simpson_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    let whole = rule(f, a, b);
    let m = 0.5 * (a + b);
    let halves = rule(f, a, m) + rule(f, m, b);
    if depth == 0 || (halves - whole).abs() < 15.0 * tol {
        halves + (halves - whole) / 15.0
    } else {
        simpson_1d(f, a, m, tol * 0.5, depth - 1) + simpson_1d(f, m, b, tol * 0.5, depth - 1)
    }
}

fn simpson_2d(f: &dyn Fn(f64, f64) -> f64, r: &Rect, tol: f64) -> f64 {
    simpson_1d(
        &|s| simpson_1d(&|x| f(s, x), r.x_lo, r.x_hi, tol * 0.1, 24),
        r.s_lo,
        r.s_hi,
        tol,
        24,
    )
}

fn check(
    name: &str,
    g: impl Fn(f64, f64) -> f64 + Copy,
    f: Surface2D,
    density: impl Fn(f64, f64) -> f64,
    r: Rect,
) {
    let got = ls_integral_2d(&|s, x| g(s, x), &f, &r, &RefinementPolicy::with_tolerance(1e-9))
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    let oracle = simpson_2d(&|s, x| g(s, x) * density(s, x), &r, 1e-11);
    let rel = (got - oracle).abs() / oracle.abs().max(1e-12);
    assert!(
        rel <= 1e-6,
        "{name}: corner sums {got} vs quadrature oracle {oracle} (rel {rel:.3e})"
    );
}

#[test]
fn product_surface_against_polynomials() {
    let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    // density of s*x is 1
    check("g=s+x", |s, x| s + x, Surface2D::analytic(|s, x| s * x), |_, _| 1.0, r);
    check(
        "g=s^2x",
        |s, x| s * s * x + 0.5,
        Surface2D::analytic(|s, x| s * x),
        |_, _| 1.0,
        r,
    );
}

#[test]
fn sine_surface_against_polynomials() {
    let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    // density of sin(s) sin(x) is cos(s) cos(x)
    check(
        "g=s^2+x",
        |s, x| s * s + x,
        Surface2D::analytic(|s, x| s.sin() * x.sin()),
        |s, x| s.cos() * x.cos(),
        r,
    );
    // frozen external value for one pair, computed to high precision
    // beforehand: int int (s^2 + x) cos s cos x ds dx on the unit square
    let got = ls_integral_2d(
        &|s, x| s * s + x,
        &Surface2D::analytic(|s, x| s.sin() * x.sin()),
        &r,
        &RefinementPolicy::with_tolerance(1e-9),
    )
    .unwrap();
    assert!(
        (got - 0.522475155430626).abs() < 1e-6,
        "frozen oracle mismatch: {got}"
    );
}

#[test]
fn wider_rectangle_with_sign_changes() {
    let r = Rect::new(0.0, 2.0, -1.0, 1.5).unwrap();
    check(
        "g=x, mixed-sign density",
        |_, x| x,
        Surface2D::analytic(|s, x| s.sin() * x.sin()),
        |s, x| s.cos() * x.cos(),
        r,
    );
}

#[test]
fn variation_of_sine_surface_matches_closed_form() {
    // |cos s cos x| has a single sign on (0,1)^2, so V_f = sin(1)^2 there
    let f = Surface2D::analytic(|s, x| s.sin() * x.sin());
    let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let v = itocalc::bv2d::variation(&f, &r, &RefinementPolicy::with_tolerance(1e-9));
    assert!(v.converged);
    let want = 1.0_f64.sin() * 1.0_f64.sin();
    assert!(
        (v.value - want).abs() < 1e-7,
        "variation {} vs {want}",
        v.value
    );
}
