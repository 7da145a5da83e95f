//! The sine-wedge breakdown terms against independently coded closed forms,
//! and a residual smoke test for the cube-root variant.

use std::f64::consts::PI;

use itocalc::itoformula::{eval_semimartingale, EvalOptions};
use itocalc::localtime::LevelGrid;
use itocalc::pathsim::{simulate_bm_stream, TimeGrid};
use itocalc_harness::builtins;

/// The time and space terms of the sine-wedge identity have explicit
/// closed-form integrands; the evaluator must reproduce the corresponding
/// discrete sums exactly.
#[test]
fn sine_wedge_terms_match_closed_forms() {
    let fs = builtins::builtin("paper-example-1").unwrap();
    let grid = TimeGrid::new(1.0, 1 << 12).unwrap();
    let path = simulate_bm_stream(&grid, 5, 0);
    let lg = LevelGrid::covering(&path, 1.0 / 128.0);
    let bd = eval_semimartingale(&fs, &path, &lg, &EvalOptions::default()).unwrap();

    let pos = |t: f64, x: f64| (PI * x).sin() * (PI * t).sin() > 0.0;
    let dt = grid.dt();
    let mut term_dt = 0.0;
    let mut term_dx = 0.0;
    for k in 0..grid.n_steps() {
        let (t, x) = (grid.t(k), path.x()[k]);
        if pos(t, x) {
            term_dt += PI * (PI * t).cos() * (PI * x).sin() * dt;
            term_dx += PI * (PI * x).cos() * (PI * t).sin() * (path.x()[k + 1] - x);
        }
    }
    assert_eq!(bd.term_dt, term_dt);
    assert_eq!(bd.term_dx, term_dx);
    // no smooth part: the quadratic-variation term is identically zero
    assert_eq!(bd.term_lap, 0.0);
    // the boundary term at t = 1 integrates a section that vanishes with
    // sin(pi t); only rounding survives
    assert!(bd.term_boundary.abs() < 1e-12, "boundary {}", bd.term_boundary);
}

#[test]
fn cbrt_sine_wedge_residual_smoke() {
    let fs = builtins::builtin("paper-example-2").unwrap();
    let grid = TimeGrid::new(1.0, 1 << 13).unwrap();
    let mut acc = 0.0;
    let n_paths = 24;
    for i in 0..n_paths {
        let path = simulate_bm_stream(&grid, 31, i);
        let lg = LevelGrid::covering(&path, 1.0 / 128.0);
        let bd = eval_semimartingale(&fs, &path, &lg, &EvalOptions::default()).unwrap();
        acc += bd.normalized_residual();
    }
    let mean = acc / n_paths as f64;
    assert!(mean < 0.25, "mean normalized residual {mean}");
}
