//! Term-by-term evaluation of generalized Ito-type identities.
//!
//! For a time-dependent function `f(t, x)` applied to a continuous
//! semimartingale the identity evaluated here reads
//!
//! ```text
//! f(t, X_t) - f(0, X_0) = int dt-f(s, X_s) ds + int grad-f(s, X_s) dX_s
//!                       + 1/2 int lap-f_h(s, X_s) d<X>_s
//!                       + int L_t(x) d_x grad-f_v(t, x)
//!                       - int int L_s(x) d_{s,x} grad-f_v(s, x)
//! ```
//!
//! with one-sided (left) derivatives, the smooth/BV split `f = f_h + f_v`,
//! and the local-time field of the half-occupation-density convention. Two
//! curve variants recentre the path along `x = l(t)`: one keeps the
//! Lebesgue-Stieltjes terms against the recentred gradient surface, the
//! other collapses them into a single time-Stieltjes integral of the
//! gradient jump across the curve against `L*(0)`. An Ito-process variant
//! evaluates everything on `[0, t /\ tau_N]`.
//!
//! Each evaluation returns the full [`TermBreakdown`]; the residual is the
//! left side minus the signed sum of the assembled terms, normalized
//! downstream by `1 + |lhs|` so functions of different scales compare.

use serde::Serialize;
use thiserror::Error;

use crate::bv2d::{self, ls_sum_1d, ls_sum_2d, Bv2dError, Partition2D, Surface2D};
use crate::localtime::{
    dt_stieltjes, local_time_occupation, FieldOptions, LevelGrid, LocalTimeField,
};
use crate::pathsim::{
    first_exit, shift_by_curve, simulate_ito, Curve, ItoProcessSpec, PathError,
    SemimartingalePath, TimeGrid,
};
use crate::quad::GaussRule;

type F2 = std::sync::Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type F1 = std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ItoFormulaError {
    #[error("function spec '{0}' does not declare the {1} variant")]
    VariantNotSupported(String, &'static str),
    #[error("function spec '{0}' has no curve attached")]
    MissingCurve(String),
    #[error("function spec '{0}' has no gradient-jump function")]
    MissingJump(String),
    #[error("function spec '{0}' has no BV gradient surface")]
    MissingBvPart(String),
    #[error("level grid does not contain the level 0 needed by the curve term")]
    LevelGridMissesZero,
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Bv2d(#[from] Bv2dError),
}

/// Smooth component `f_h`: `C^1` in `x` with a left second derivative.
#[derive(Clone)]
pub struct SmoothPart {
    f: F2,
    grad: F2,
    lap_left: F2,
}

impl SmoothPart {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        lap_left: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothPart {
            f: std::sync::Arc::new(f),
            grad: std::sync::Arc::new(grad),
            lap_left: std::sync::Arc::new(lap_left),
        }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn grad(&self, t: f64, x: f64) -> f64 {
        (self.grad)(t, x)
    }

    pub fn lap_left(&self, t: f64, x: f64) -> f64 {
        (self.lap_left)(t, x)
    }
}

/// Bounded-variation component `f_v`, carried through its left gradient as
/// a BV surface. When a curve is attached the surface lives in
/// curve-relative coordinates: `surface(t, y) = grad-f_v(t, y + l(t))`.
#[derive(Clone)]
pub struct BvPart {
    f: F2,
    grad_left: Surface2D,
}

impl BvPart {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad_left: Surface2D,
    ) -> Self {
        BvPart { f: std::sync::Arc::new(f), grad_left }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn surface(&self) -> &Surface2D {
        &self.grad_left
    }
}

/// Which identity variants a function spec declares itself valid for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VariantFlags {
    /// Plain semimartingale form with the smooth/BV split.
    pub semimartingale: bool,
    /// Curve form with Lebesgue-Stieltjes terms of the recentred gradient.
    pub curve_ls: bool,
    /// Curve form with the gradient-jump term at the curve.
    pub curve_jump: bool,
    /// Ito-process form on the stopped interval, derivatives possibly only
    /// square integrable.
    pub ito_process: bool,
}

/// The `f` of a generalized Ito identity, with user-supplied one-sided
/// derivative fields and the smooth/BV split.
#[derive(Clone)]
pub struct FunctionSpec {
    pub name: String,
    f: F2,
    dt_left: F2,
    grad_left: F2,
    smooth: Option<SmoothPart>,
    bv: Option<BvPart>,
    curve: Option<Curve>,
    jump: Option<F1>,
    pub variants: VariantFlags,
}

impl std::fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionSpec")
            .field("name", &self.name)
            .field("has_smooth", &self.smooth.is_some())
            .field("has_bv", &self.bv.is_some())
            .field("has_curve", &self.curve.is_some())
            .field("has_jump", &self.jump.is_some())
            .field("variants", &self.variants)
            .finish()
    }
}

impl FunctionSpec {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dt_left: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad_left: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FunctionSpec {
            name: name.into(),
            f: std::sync::Arc::new(f),
            dt_left: std::sync::Arc::new(dt_left),
            grad_left: std::sync::Arc::new(grad_left),
            smooth: None,
            bv: None,
            curve: None,
            jump: None,
            variants: VariantFlags::default(),
        }
    }

    pub fn with_smooth(mut self, part: SmoothPart) -> Self {
        self.smooth = Some(part);
        self
    }

    pub fn with_bv(mut self, part: BvPart) -> Self {
        self.bv = Some(part);
        self
    }

    pub fn with_curve(mut self, curve: Curve) -> Self {
        self.curve = Some(curve);
        self
    }

    /// Gradient jump across the curve, `t -> grad f(t, l(t)+) - grad f(t, l(t)-)`.
    pub fn with_jump(mut self, jump: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.jump = Some(std::sync::Arc::new(jump));
        self
    }

    pub fn with_variants(mut self, variants: VariantFlags) -> Self {
        self.variants = variants;
        self
    }

    pub fn f(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn dt_left(&self, t: f64, x: f64) -> f64 {
        (self.dt_left)(t, x)
    }

    pub fn grad_left(&self, t: f64, x: f64) -> f64 {
        (self.grad_left)(t, x)
    }

    pub fn smooth(&self) -> Option<&SmoothPart> {
        self.smooth.as_ref()
    }

    pub fn bv(&self) -> Option<&BvPart> {
        self.bv.as_ref()
    }

    pub fn curve(&self) -> Option<&Curve> {
        self.curve.as_ref()
    }

    pub fn jump_at(&self, t: f64) -> Option<f64> {
        self.jump.as_ref().map(|j| j(t))
    }

    pub fn has_jump(&self) -> bool {
        self.jump.is_some()
    }
}

/// Every evaluated term of one identity plus the residual.
///
/// The residual is assembled as
/// `lhs - (term_dt + term_dx + term_lap + term_boundary - term_2d + term_curve)`;
/// the boundary term enters with a plus and the two-parameter term with a
/// minus, a sign pinned by the Tanaka case where the boundary term is
/// `+2 L_t(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermBreakdown {
    /// `f(t, X_t) - f(0, X_0)`.
    pub lhs: f64,
    /// Left-endpoint quadrature of the left time derivative.
    pub term_dt: f64,
    /// Ito integral of the left space derivative.
    pub term_dx: f64,
    /// `1/2 int lap-f_h d<X>`.
    pub term_lap: f64,
    /// `int L_T(x) d_x grad-f_v(T, x)`.
    pub term_boundary: f64,
    /// `int int L_s(x) d_{s,x} grad-f_v(s, x)` (enters negatively).
    pub term_2d: f64,
    /// `int jump(s) d_s L*_s(0)` for the curve-jump form.
    pub term_curve: f64,
    pub residual: f64,
    /// Whether the Stieltjes terms were integrated exactly (aligned
    /// partitions). Kept so a future refining integrator can flag
    /// non-converged contributions.
    pub ls_converged: bool,
}

impl TermBreakdown {
    pub fn normalized_residual(&self) -> f64 {
        self.residual.abs() / (1.0 + self.lhs.abs())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub field: FieldOptions,
}

/// Which curve formula to use for a spec that supports both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveForm {
    /// Lebesgue-Stieltjes terms against the recentred gradient surface.
    LsSurface,
    /// Gradient-jump term against `L*(0)`.
    JumpAtCurve,
}

enum Mode {
    LsTerms,
    JumpTerm,
}

fn assemble(
    fs: &FunctionSpec,
    path: &SemimartingalePath,
    curve: &Curve,
    lg: &LevelGrid,
    opts: &EvalOptions,
    mode: Mode,
) -> Result<TermBreakdown, ItoFormulaError> {
    let grid = path.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let x = path.x();
    let qv = path.qv();
    let t_end = grid.horizon();

    let lhs = fs.f(t_end, x[n]) - fs.f(0.0, x[0]);

    let mut term_dt = 0.0;
    let mut term_dx = 0.0;
    let mut term_lap = 0.0;
    for k in 0..n {
        let t = grid.t(k);
        term_dt += fs.dt_left(t, x[k]) * dt;
        term_dx += fs.grad_left(t, x[k]) * (x[k + 1] - x[k]);
        if let Some(sp) = fs.smooth() {
            let dqv = qv[k + 1] - qv[k];
            if dqv != 0.0 {
                term_lap += 0.5 * sp.lap_left(t, x[k]) * dqv;
            }
        }
    }

    let mut term_boundary = 0.0;
    let mut term_2d = 0.0;
    let mut term_curve = 0.0;

    let needs_field = match mode {
        Mode::LsTerms => fs.bv().is_some(),
        Mode::JumpTerm => true,
    };
    let field: Option<LocalTimeField> = if needs_field {
        let shifted = shift_by_curve(path, curve);
        Some(local_time_occupation(&shifted, lg, &opts.field))
    } else {
        None
    };

    match mode {
        Mode::LsTerms => {
            if let (Some(bv), Some(field)) = (fs.bv(), field.as_ref()) {
                let surface = bv.surface();
                // Levels plus declared jump lines: the field is piecewise
                // constant on these cells, so the corner sums below are the
                // exact Stieltjes integrals of the estimated field.
                let mut x_pts = lg.levels();
                bv2d::merge_points(&mut x_pts, &surface.jumps().x_lines);
                let section = bv2d::section_of(surface, t_end);
                term_boundary = ls_sum_1d(&|y| field.value_at(t_end, y), &section, &x_pts);

                let mut s_pts = field.times().to_vec();
                bv2d::merge_points(&mut s_pts, &surface.jumps().s_lines);
                let part = Partition2D::new(s_pts, x_pts)?;
                term_2d = ls_sum_2d(&|s, y| field.value_at(s, y), surface, &part);
            }
        }
        Mode::JumpTerm => {
            let field = field.as_ref().expect("field built for the jump term");
            let j0 = lg.bin(0.0).ok_or(ItoFormulaError::LevelGridMissesZero)?;
            let series = field.level_series(j0);
            let phi: Vec<f64> = field
                .times()
                .iter()
                .map(|&t| fs.jump_at(t).expect("jump checked by caller"))
                .collect();
            term_curve = dt_stieltjes(&phi, &series);
        }
    }

    let rhs = term_dt + term_dx + term_lap + term_boundary - term_2d + term_curve;
    Ok(TermBreakdown {
        lhs,
        term_dt,
        term_dx,
        term_lap,
        term_boundary,
        term_2d,
        term_curve,
        residual: lhs - rhs,
        ls_converged: true,
    })
}

/// Evaluates the semimartingale identity (smooth/BV split, no curve).
pub fn eval_semimartingale(
    fs: &FunctionSpec,
    path: &SemimartingalePath,
    lg: &LevelGrid,
    opts: &EvalOptions,
) -> Result<TermBreakdown, ItoFormulaError> {
    if !fs.variants.semimartingale {
        return Err(ItoFormulaError::VariantNotSupported(
            fs.name.clone(),
            "semimartingale",
        ));
    }
    assemble(fs, path, &Curve::zero(), lg, opts, Mode::LsTerms)
}

/// Evaluates the curve identity, choosing the Lebesgue-Stieltjes form when
/// the function spec carries a BV gradient surface and the jump form
/// otherwise.
///
/// The level grid must cover the recentred path `X - l`.
pub fn eval_curve(
    fs: &FunctionSpec,
    path: &SemimartingalePath,
    lg: &LevelGrid,
    opts: &EvalOptions,
) -> Result<TermBreakdown, ItoFormulaError> {
    let form = if fs.variants.curve_ls && fs.bv().is_some() {
        CurveForm::LsSurface
    } else {
        CurveForm::JumpAtCurve
    };
    eval_curve_form(fs, path, lg, opts, form)
}

/// Evaluates the curve identity in an explicit form.
pub fn eval_curve_form(
    fs: &FunctionSpec,
    path: &SemimartingalePath,
    lg: &LevelGrid,
    opts: &EvalOptions,
    form: CurveForm,
) -> Result<TermBreakdown, ItoFormulaError> {
    let curve = fs
        .curve()
        .cloned()
        .ok_or_else(|| ItoFormulaError::MissingCurve(fs.name.clone()))?;
    match form {
        CurveForm::LsSurface => {
            if !fs.variants.curve_ls {
                return Err(ItoFormulaError::VariantNotSupported(fs.name.clone(), "curve"));
            }
            if fs.bv().is_none() {
                return Err(ItoFormulaError::MissingBvPart(fs.name.clone()));
            }
            assemble(fs, path, &curve, lg, opts, Mode::LsTerms)
        }
        CurveForm::JumpAtCurve => {
            if !fs.variants.curve_jump {
                return Err(ItoFormulaError::VariantNotSupported(fs.name.clone(), "curve-jump"));
            }
            if !fs.has_jump() {
                return Err(ItoFormulaError::MissingJump(fs.name.clone()));
            }
            assemble(fs, path, &curve, lg, opts, Mode::JumpTerm)
        }
    }
}

/// Evaluates the identity for an Ito process on `[0, t /\ tau_N]` with
/// `tau_N` the first exit from `[-N, N]`. Derivative fields may be merely
/// square integrable; the coefficient bounds are spot-checked first.
pub fn eval_ito_process(
    fs: &FunctionSpec,
    proc_spec: &ItoProcessSpec,
    path: &SemimartingalePath,
    lg: &LevelGrid,
    n_bound: f64,
    opts: &EvalOptions,
) -> Result<TermBreakdown, ItoFormulaError> {
    if !fs.variants.ito_process {
        return Err(ItoFormulaError::VariantNotSupported(fs.name.clone(), "ito-process"));
    }
    proc_spec.validate_on((0.0, path.grid().horizon()), (-n_bound, n_bound), 17)?;
    let exit = first_exit(path, n_bound);
    if exit == 0 {
        // stopped at time zero: every integral is over an empty interval
        return Ok(TermBreakdown {
            lhs: 0.0,
            term_dt: 0.0,
            term_dx: 0.0,
            term_lap: 0.0,
            term_boundary: 0.0,
            term_2d: 0.0,
            term_curve: 0.0,
            residual: 0.0,
            ls_converged: true,
        });
    }
    let stopped = path.truncated(exit);
    assemble(fs, &stopped, &Curve::zero(), lg, opts, Mode::LsTerms)
}

/// Monte Carlo check of the Krylov-type bound
/// `E int_0^{t /\ tau_N} |f(r, X_r)| dr <= M ||f||_{L^2([0,t] x [-N,N])}`.
#[derive(Debug, Clone, Serialize)]
pub struct KrylovReport {
    pub lhs_mean: f64,
    /// Half-width of the 95% normal confidence interval of the mean.
    pub lhs_ci_half: f64,
    /// `(int_0^t int_{-N}^{N} f^2 dx dr)^{1/2}` by composite quadrature.
    pub rhs: f64,
    /// `lhs_mean / rhs`, absent when the right side vanishes.
    pub ratio: Option<f64>,
    /// Right side numerically zero.
    pub degenerate: bool,
    /// Right side zero while the left side is significantly positive,
    /// indicating a support mismatch between `f` and the box.
    pub inconsistent: bool,
    pub n_bound: f64,
    pub t: f64,
    pub delta: f64,
    pub k_bound: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

pub fn krylov_check(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    spec: &ItoProcessSpec,
    n_bound: f64,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<KrylovReport, ItoFormulaError> {
    spec.validate_on((0.0, t), (-n_bound, n_bound), 33)?;
    let grid = TimeGrid::new(t, n_steps)?;
    let dt = grid.dt();
    let mut samples = Vec::with_capacity(n_paths);
    for i in 0..n_paths {
        let path = simulate_ito(spec, &grid, seed, i as u64)?;
        let exit = first_exit(&path, n_bound);
        let mut acc = 0.0;
        for k in 0..exit {
            acc += f(grid.t(k), path.x()[k]).abs() * dt;
        }
        samples.push(acc);
    }
    let mean = samples.iter().sum::<f64>() / n_paths as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / (n_paths.max(2) - 1) as f64;
    let ci_half = 1.96 * (var / n_paths as f64).sqrt();

    let rule = GaussRule::new(8);
    // Panel edges include x = 0, so indicator-style integrands are handled
    // to panel-width accuracy.
    let sq = rule.integrate_panels(0.0, t, 32, |r| {
        rule.integrate_panels(-n_bound, n_bound, 128, |x| {
            let v = f(r, x);
            v * v
        })
    });
    let rhs = sq.max(0.0).sqrt();
    let degenerate = rhs < 1e-12;
    let inconsistent = degenerate && mean > ci_half.max(1e-12);
    Ok(KrylovReport {
        lhs_mean: mean,
        lhs_ci_half: ci_half,
        rhs,
        ratio: if degenerate { None } else { Some(mean / rhs) },
        degenerate,
        inconsistent,
        n_bound,
        t,
        delta: spec.delta,
        k_bound: spec.k_bound,
        n_paths,
        n_steps,
        seed,
    })
}

/// Path generator for convergence studies.
#[derive(Clone)]
pub enum Driver {
    BrownianMotion,
    ItoProcess { spec: ItoProcessSpec, n_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaVariant {
    Semimartingale,
    Curve,
    CurveJump,
    ItoProcess,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceOptions {
    pub horizon: f64,
    pub seed: u64,
    /// Level spacing used at `n_ref` steps.
    pub level_spacing_ref: f64,
    pub n_ref: usize,
    /// Scale the level spacing like `sqrt(dt)` across refinement levels, so
    /// both error sources shrink together and the fitted rate is clean.
    pub couple_level_spacing: bool,
    pub field: FieldOptions,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            horizon: 1.0,
            seed: 0,
            level_spacing_ref: 1.0 / 128.0,
            n_ref: 1 << 14,
            couple_level_spacing: true,
            field: FieldOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub n_steps: usize,
    pub level_spacing: f64,
    pub mean_normalized_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Log-log slope of the mean residual against the time step.
    pub slope_in_dt: f64,
}

impl RateTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].mean_normalized_residual < w[0].mean_normalized_residual)
    }
}

fn snap_to_power_of_two(x: f64) -> f64 {
    (2.0_f64).powi(x.log2().round() as i32)
}

/// Level spacing for a refinement level under the square-root coupling.
pub fn coupled_level_spacing(opts: &ConvergenceOptions, n_steps: usize) -> f64 {
    if opts.couple_level_spacing {
        snap_to_power_of_two(
            opts.level_spacing_ref * (opts.n_ref as f64 / n_steps as f64).sqrt(),
        )
    } else {
        opts.level_spacing_ref
    }
}

/// Evaluates one path at the given size for a variant; shared by the
/// convergence study and the batch harness.
#[allow(clippy::too_many_arguments)]
pub fn eval_path(
    fs: &FunctionSpec,
    driver: &Driver,
    variant: FormulaVariant,
    n_steps: usize,
    level_spacing: f64,
    horizon: f64,
    seed: u64,
    stream: u64,
    eval_opts: &EvalOptions,
) -> Result<TermBreakdown, ItoFormulaError> {
    let grid = TimeGrid::new(horizon, n_steps)?;
    let path = match driver {
        Driver::BrownianMotion => crate::pathsim::simulate_bm_stream(&grid, seed, stream),
        Driver::ItoProcess { spec, .. } => simulate_ito(spec, &grid, seed, stream)?,
    };
    let reference = match (variant, fs.curve()) {
        (FormulaVariant::Curve | FormulaVariant::CurveJump, Some(c)) => {
            shift_by_curve(&path, c)
        }
        _ => path.clone(),
    };
    let lg = LevelGrid::covering(&reference, level_spacing);
    match variant {
        FormulaVariant::Semimartingale => eval_semimartingale(fs, &path, &lg, eval_opts),
        FormulaVariant::Curve => eval_curve(fs, &path, &lg, eval_opts),
        FormulaVariant::CurveJump => {
            eval_curve_form(fs, &path, &lg, eval_opts, CurveForm::JumpAtCurve)
        }
        FormulaVariant::ItoProcess => match driver {
            Driver::ItoProcess { spec, n_bound } => {
                eval_ito_process(fs, spec, &path, &lg, *n_bound, eval_opts)
            }
            Driver::BrownianMotion => Err(ItoFormulaError::VariantNotSupported(
                fs.name.clone(),
                "ito-process (needs an Ito driver)",
            )),
        },
    }
}

/// Mean normalized residual across dyadic refinement levels with a fitted
/// log-log rate in the time step.
pub fn residual_convergence(
    fs: &FunctionSpec,
    driver: &Driver,
    variant: FormulaVariant,
    steps: &[usize],
    n_paths: usize,
    opts: &ConvergenceOptions,
) -> Result<RateTable, ItoFormulaError> {
    let eval_opts = EvalOptions { field: opts.field };
    let mut rows = Vec::with_capacity(steps.len());
    for &n_steps in steps {
        let spacing = coupled_level_spacing(opts, n_steps);
        let mut acc = 0.0;
        for i in 0..n_paths {
            let bd = eval_path(
                fs,
                driver,
                variant,
                n_steps,
                spacing,
                opts.horizon,
                opts.seed,
                i as u64,
                &eval_opts,
            )?;
            acc += bd.normalized_residual();
        }
        rows.push(RateRow {
            n_steps,
            level_spacing: spacing,
            mean_normalized_residual: acc / n_paths as f64,
        });
    }
    // least-squares slope of ln(residual) on ln(dt)
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
    Ok(RateTable { rows, slope_in_dt: slope })
}
