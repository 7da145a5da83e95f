//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (visible with `--nocapture`). Tolerances are pinned
//! in the assertions; nothing is deferred to later calibration.
//!
//! Run with `cargo test -p itocalc-harness --test acceptance`.

use approx::assert_abs_diff_eq;
use itocalc::bv2d::{
    jordan_decompose, ls_integral_2d, rect_increment, variation, variation_on, Partition2D,
    Rect, RefinementPolicy, Surface2D,
};
use itocalc::itoformula::{
    eval_curve, eval_path, eval_semimartingale, krylov_check, ConvergenceOptions, Driver,
    EvalOptions, FormulaVariant,
};
use itocalc::localtime::{local_time_occupation, local_time_tanaka, occupation_check, FieldOptions, LevelGrid};
use itocalc::mollifier::{bump, bump_normalization, mollify, MollifierSpec};
use itocalc::pathsim::{simulate_bm_stream, ItoProcessSpec, TimeGrid};
use itocalc_harness::builtins;
use itocalc_harness::runner::parallel_residual_convergence;

const DA_128: f64 = 1.0 / 128.0; // 2^-7

fn pass(criterion: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {criterion:2} {name}: PASS ({detail})");
}

/// Tanaka identity: residual of f = |x| for Brownian motion, small at the
/// finest grid and strictly decreasing across three dyadic levels.
#[test]
fn criterion_01_tanaka_identity() {
    let fs = builtins::builtin("tanaka").unwrap();
    let opts = ConvergenceOptions { seed: 7, ..Default::default() };
    let table = parallel_residual_convergence(
        &fs,
        &Driver::BrownianMotion,
        FormulaVariant::Semimartingale,
        &[1 << 12, 1 << 14, 1 << 16],
        1024,
        &opts,
    )
    .unwrap();
    let means: Vec<f64> = table.rows.iter().map(|r| r.mean_normalized_residual).collect();
    assert!(
        means[0] > means[1] && means[1] > means[2],
        "mean |residual| must decrease strictly: {means:?}"
    );
    assert!(
        means[2] <= 0.05,
        "mean normalized residual at 2^16 is {} > 0.05",
        means[2]
    );
    pass(
        1,
        "tanaka-identity",
        format!("means {:?} <= 0.05, strictly decreasing", means),
    );
}

/// Classical reduction: f = x^2 telescopes against realized quadratic
/// variation, residual at rounding level, no Stieltjes terms.
#[test]
fn criterion_02_classical_reduction() {
    let fs = builtins::builtin("square").unwrap();
    let opts = EvalOptions::default();
    let mut worst = 0.0_f64;
    for i in 0..128 {
        let bd = eval_path(
            &fs,
            &Driver::BrownianMotion,
            FormulaVariant::Semimartingale,
            1 << 14,
            DA_128,
            1.0,
            2,
            i,
            &opts,
        )
        .unwrap();
        assert_eq!(bd.term_boundary, 0.0, "boundary term must be exactly zero");
        assert_eq!(bd.term_2d, 0.0, "2d term must be exactly zero");
        worst = worst.max(bd.normalized_residual());
    }
    assert!(worst <= 1e-3, "worst per-path normalized residual {worst}");
    pass(2, "classical-reduction", format!("worst residual {worst:.3e} <= 1e-3"));
}

/// Occupation-times identity with g = x^2, pathwise within 2% for at least
/// 95% of 256 Brownian paths.
#[test]
fn criterion_03_occupation_times() {
    let grid = TimeGrid::new(1.0, 1 << 14).unwrap();
    let n_paths = 256;
    let mut within = 0;
    let mut worst = 0.0_f64;
    for i in 0..n_paths {
        let path = simulate_bm_stream(&grid, 11, i);
        let lg = LevelGrid::covering(&path, DA_128);
        let chk = occupation_check(&|_, x| x * x, &path, &lg, &FieldOptions::default());
        if chk.rel_error <= 0.02 {
            within += 1;
        }
        worst = worst.max(chk.rel_error);
    }
    let share = within as f64 / n_paths as f64;
    assert!(share >= 0.95, "only {share:.3} of paths within 2% (worst {worst:.4})");
    pass(
        3,
        "occupation-times",
        format!("{share:.3} of {n_paths} paths within 2% (worst {worst:.4})"),
    );
}

/// Local-time calibration at level 0: the Monte Carlo mean matches the
/// closed-form expectation 1/sqrt(2 pi), and the occupation and Tanaka
/// estimators agree pathwise on average.
#[test]
fn criterion_04_local_time_calibration() {
    let grid = TimeGrid::new(1.0, 1 << 16).unwrap();
    let n_paths = 1024;
    let mut level_sum = 0.0;
    let mut gap_sum = 0.0;
    for i in 0..n_paths {
        let path = simulate_bm_stream(&grid, 40, i);
        let lg = LevelGrid::covering(&path, DA_128);
        let field = local_time_occupation(&path, &lg, &FieldOptions::default());
        let occ = field.value_at(1.0, 0.0);
        let tan = *local_time_tanaka(&path, 0.0).last().unwrap();
        level_sum += occ;
        gap_sum += (occ - tan).abs();
    }
    let mean_l = level_sum / n_paths as f64;
    let mean_gap = gap_sum / n_paths as f64;
    let target = 0.3989422804014327; // 1/sqrt(2 pi)
    assert!(
        (mean_l - target).abs() <= 0.02,
        "mean L_1(0) = {mean_l:.5} vs {target:.5}"
    );
    assert!(
        mean_gap <= 0.05,
        "mean pathwise occupation/Tanaka gap {mean_gap:.4} > 0.05"
    );
    pass(
        4,
        "local-time-calibration",
        format!("mean L_1(0) = {mean_l:.4} (target {target:.4}), mean estimator gap {mean_gap:.4}"),
    );
}

/// Jordan decomposition: on the builtin surface family both members have
/// nonnegative cell increments and their difference reproduces the
/// left-continuous surface at the decomposition nodes.
#[test]
fn criterion_05_jordan_decomposition() {
    let cases: Vec<(&str, Surface2D, Rect)> = vec![
        (
            "sine-wedge-grad",
            builtins::surface_builtin("paper-example-1").unwrap(),
            Rect::new(0.0, 2.0, 0.0, 2.0).unwrap(),
        ),
        (
            "step",
            builtins::surface_builtin("step").unwrap(),
            Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        ),
        (
            "product",
            builtins::surface_builtin("product").unwrap(),
            Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        ),
    ];
    for (name, surf, rect) in cases {
        let policy = RefinementPolicy {
            tolerance: Some(1e-4),
            initial_level: 3,
            max_cells: 1 << 22,
            accelerate: true,
        };
        let jp = jordan_decompose(&surf, &rect, &policy);
        assert!(jp.variation.converged, "{name}: variation not converged");
        // the decomposition grid lines are recorded as the members' jumps
        let s_nodes = jp.f1.jumps().s_lines.clone();
        let x_nodes = jp.f1.jumps().x_lines.clone();
        let stride_s = (s_nodes.len() / 64).max(1);
        let stride_x = (x_nodes.len() / 64).max(1);
        let mut min_inc = f64::INFINITY;
        let mut worst_diff = 0.0_f64;
        for iw in s_nodes.windows(2).step_by(stride_s) {
            for jw in x_nodes.windows(2).step_by(stride_x) {
                let cell = Rect::new(iw[0], iw[1], jw[0], jw[1]).unwrap();
                min_inc = min_inc
                    .min(rect_increment(&jp.f1, &cell))
                    .min(rect_increment(&jp.f2, &cell));
            }
        }
        for &s in s_nodes.iter().step_by(stride_s) {
            for &x in x_nodes.iter().step_by(stride_x) {
                let diff = (jp.f1.eval(s, x) - jp.f2.eval(s, x) - surf.eval_left(s, x)).abs();
                worst_diff = worst_diff.max(diff);
            }
        }
        assert!(min_inc >= -1e-12, "{name}: cell increment {min_inc} < -1e-12");
        assert!(worst_diff <= 1e-12, "{name}: |f1 - f2 - f| = {worst_diff}");
        pass(
            5,
            "jordan-decomposition",
            format!("{name}: min increment {min_inc:.2e}, |f1-f2-f| <= {worst_diff:.2e}"),
        );
    }
}

/// Variation additivity: the four-rectangle identity holds to 1e-12 on
/// aligned grids and refinement never decreases the partition variation.
#[test]
fn criterion_06_variation_additivity() {
    let surfaces: Vec<(&str, Surface2D, Rect)> = vec![
        (
            "sine-wedge-grad",
            builtins::surface_builtin("paper-example-1").unwrap(),
            Rect::new(0.0, 2.0, 0.0, 2.0).unwrap(),
        ),
        (
            "step",
            builtins::surface_builtin("step").unwrap(),
            Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        ),
        (
            "product",
            builtins::surface_builtin("product").unwrap(),
            Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        ),
    ];
    for (name, surf, r) in surfaces {
        // split at the midpoint: quadrant grids at level k tile the full
        // grid at level k+1, so all five variations live on aligned grids
        let (s1, a1) = (0.5 * (r.s_lo + r.s_hi), 0.5 * (r.x_lo + r.x_hi));
        let level = 5;
        let sub = |s_lo, s_hi, x_lo, x_hi| {
            let rect = Rect::new(s_lo, s_hi, x_lo, x_hi).unwrap();
            variation_on(&surf, &Partition2D::dyadic(&rect, level, surf.jumps()))
        };
        let v_full = variation_on(
            &surf,
            &Partition2D::dyadic(&r, level + 1, surf.jumps()),
        );
        let v11 = sub(r.s_lo, s1, r.x_lo, a1);
        let v12 = sub(r.s_lo, s1, a1, r.x_hi);
        let v21 = sub(s1, r.s_hi, r.x_lo, a1);
        let v22 = sub(s1, r.s_hi, a1, r.x_hi);
        // V(full) = V(left half) + V(bottom half) + V(upper-right quadrant)
        //         - V(lower-left quadrant)
        let rhs = (v11 + v12) + (v11 + v21) + v22 - v11;
        let gap = (v_full - rhs).abs();
        assert!(gap <= 1e-12, "{name}: four-rectangle identity off by {gap:.3e}");

        let vr = variation(&surf, &r, &RefinementPolicy::with_tolerance(1e-4));
        for w in vr.refinement_trace.windows(2) {
            assert!(
                w[1].1 >= w[0].1 - 1e-12 * (1.0 + w[0].1.abs()),
                "{name}: refinement decreased V_P: {} -> {}",
                w[0].1,
                w[1].1
            );
        }
        pass(
            6,
            "variation-additivity",
            format!("{name}: identity gap {gap:.2e}, trace monotone over {} levels", vr.refinement_trace.len()),
        );
    }
}

/// Adaptive 2D Simpson, local to this suite, as the independent oracle for
/// the corner-sum Stieltjes integrals.
mod oracle {
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
            simpson_1d(f, a, m, tol * 0.5, depth - 1)
                + simpson_1d(f, m, b, tol * 0.5, depth - 1)
        }
    }

    pub fn simpson_2d(f: &dyn Fn(f64, f64) -> f64, r: (f64, f64, f64, f64), tol: f64) -> f64 {
        simpson_1d(
            &|s| simpson_1d(&|x| f(s, x), r.2, r.3, tol * 0.1, 24),
            r.0,
            r.1,
            tol,
            24,
        )
    }
}

/// Two-parameter Stieltjes integrals agree with the smooth-density
/// quadrature oracle to 1e-6 relative for polynomial integrands.
#[test]
fn criterion_07_ls2d_oracle() {
    type Scalar2 = Box<dyn Fn(f64, f64) -> f64>;
    let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let policy = RefinementPolicy::with_tolerance(1e-9);
    let cases: Vec<(&str, Surface2D, Scalar2, Scalar2)> = vec![
        (
            "g=s+x against d(s*x)",
            Surface2D::analytic(|s, x| s * x),
            Box::new(|s, x| s + x),
            Box::new(|_, _| 1.0),
        ),
        (
            "g=s^2x+1 against d(s*x)",
            Surface2D::analytic(|s, x| s * x),
            Box::new(|s, x| s * s * x + 1.0),
            Box::new(|_, _| 1.0),
        ),
        (
            "g=s^2+x against d(sin s sin x)",
            Surface2D::analytic(|s, x| s.sin() * x.sin()),
            Box::new(|s, x| s * s + x),
            Box::new(|s, x| s.cos() * x.cos()),
        ),
        (
            "g=x against d(sin s sin x)",
            Surface2D::analytic(|s, x| s.sin() * x.sin()),
            Box::new(|_, x| 3.0 * x - 1.0),
            Box::new(|s, x| s.cos() * x.cos()),
        ),
    ];
    for (name, surf, g, density) in cases {
        let got = ls_integral_2d(&*g, &surf, &unit, &policy).unwrap();
        let want = oracle::simpson_2d(&|s, x| g(s, x) * density(s, x), (0.0, 1.0, 0.0, 1.0), 1e-12);
        let rel = (got - want).abs() / want.abs().max(1e-12);
        assert!(rel <= 1e-6, "{name}: {got} vs oracle {want} (rel {rel:.2e})");
        pass(7, "ls2d-oracle", format!("{name}: rel error {rel:.2e} <= 1e-6"));
    }
}

/// The sine-wedge identity: mean normalized residual small at 2^16 and
/// strictly decreasing across three dyadic levels.
#[test]
fn criterion_08_sine_wedge_identity() {
    let fs = builtins::builtin("paper-example-1").unwrap();
    let opts = ConvergenceOptions {
        seed: 7,
        couple_level_spacing: false,
        level_spacing_ref: DA_128,
        ..Default::default()
    };
    let table = parallel_residual_convergence(
        &fs,
        &Driver::BrownianMotion,
        FormulaVariant::Semimartingale,
        &[1 << 12, 1 << 14, 1 << 16],
        512,
        &opts,
    )
    .unwrap();
    let means: Vec<f64> = table.rows.iter().map(|r| r.mean_normalized_residual).collect();
    assert!(
        means[0] > means[1] && means[1] > means[2],
        "mean |residual| must decrease strictly: {means:?}"
    );
    assert!(means[2] <= 0.1, "mean normalized residual at 2^16 is {}", means[2]);
    pass(
        8,
        "sine-wedge-identity",
        format!("means {means:?} <= 0.1, strictly decreasing"),
    );
}

/// Curve identity for the moving kink, and the zero-curve reduction being
/// bit-identical to the plain evaluation.
#[test]
fn criterion_09_curve_identity() {
    // jump form with l(t) = 0.2 sin t
    let fs = builtins::builtin("curve-kink").unwrap();
    let opts = EvalOptions::default();
    let n_paths = 512;
    let mut acc = 0.0;
    for i in 0..n_paths {
        let bd = eval_path(
            &fs,
            &Driver::BrownianMotion,
            FormulaVariant::CurveJump,
            1 << 16,
            DA_128,
            1.0,
            7,
            i,
            &opts,
        )
        .unwrap();
        acc += bd.normalized_residual();
    }
    let mean = acc / n_paths as f64;
    assert!(mean <= 0.1, "curve-jump mean normalized residual {mean}");

    // zero curve: eval_curve and eval_semimartingale agree bit for bit
    let flat = builtins::curve_kink(0.0);
    let grid = TimeGrid::new(1.0, 1 << 12).unwrap();
    for i in 0..8 {
        let path = simulate_bm_stream(&grid, 21, i);
        let lg = LevelGrid::covering(&path, DA_128);
        let a = eval_semimartingale(&flat, &path, &lg, &opts).unwrap();
        let b = eval_curve(&flat, &path, &lg, &opts).unwrap();
        assert_eq!(a, b, "zero-curve evaluation must be bit-identical");
    }
    pass(
        9,
        "curve-identity",
        format!("jump-form mean residual {mean:.4} <= 0.1; zero-curve reduction bit-identical"),
    );
}

/// Krylov-type bound: ratios finite and stable across refinement, and the
/// analytic bound for f = 1 holds.
#[test]
fn criterion_10_krylov_bound() {
    let spec = ItoProcessSpec::new(|_, _| 1.0, |_, _| 0.0, 0.0, 1.0, 1.0).unwrap();
    let family = ["one", "x2", "sin-pi-x", "indicator-positive"];
    let mut sups = Vec::new();
    for n_steps in [1 << 12, 1 << 14] {
        let mut sup: f64 = 0.0;
        for name in family {
            let f = builtins::integrand_builtin(name).unwrap();
            let rep = krylov_check(&*f, &spec, 2.0, 1.0, 2048, n_steps, 13).unwrap();
            let ratio = rep.ratio.expect("rhs positive for this family");
            assert!(ratio.is_finite(), "{name}: ratio not finite");
            if name == "one" {
                // |f| = 1 integrates to t /\ tau_N <= 1 pathwise
                assert!(
                    rep.lhs_mean <= 1.0 + rep.lhs_ci_half,
                    "lhs {} above the analytic bound",
                    rep.lhs_mean
                );
            }
            sup = sup.max(ratio);
        }
        sups.push(sup);
    }
    let drift = (sups[1] - sups[0]).abs() / sups[0];
    assert!(drift <= 0.10, "sup ratio moved {drift:.3} across refinement: {sups:?}");
    pass(
        10,
        "krylov-bound",
        format!("sup ratios {sups:?}, drift {drift:.4} <= 0.10"),
    );
}

/// Mollifier: kernel mass, the externally computed normalization constant,
/// and the left-gradient limit at a kink.
#[test]
fn criterion_11_mollifier() {
    // unit mass, checked by composite Simpson independent of the kernel's
    // own normalization quadrature
    let n = 1 << 14;
    let h = 2.0 / n as f64;
    let mut mass = bump(0.0) + bump(2.0);
    for k in 1..n {
        mass += if k % 2 == 1 { 4.0 } else { 2.0 } * bump(k as f64 * h);
    }
    mass *= h / 3.0;
    assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);

    // normalization against the frozen high-precision oracle
    let c_oracle = 2.252283621043581;
    let c = bump_normalization();
    assert!(
        (c - c_oracle).abs() <= 1e-8,
        "normalization {c} vs oracle {c_oracle}"
    );

    // left-mollified gradient of x+ at the kink converges to the left
    // derivative 0
    let sm = mollify(
        Surface2D::analytic(|_, x| x.max(0.0)),
        MollifierSpec::left(64).unwrap(),
    );
    let err = sm.dx(1.0, 0.0).abs();
    assert!(err <= 1e-3, "left gradient at the kink is {err}");
    pass(
        11,
        "mollifier",
        format!("mass defect {:.2e}, |c - oracle| {:.2e}, kink gradient {err:.2e}", (mass - 1.0).abs(), (c - c_oracle).abs()),
    );
}
