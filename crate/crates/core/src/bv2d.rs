//! Two-parameter bounded-variation calculus.
//!
//! A two-variable function `f(s, x)` of bounded variation induces a signed
//! measure through its rectangle increments
//!
//! ```text
//! mu([s1,s2) x [x1,x2)) = f(s2,x2) - f(s2,x1) - f(s1,x2) + f(s1,x1)
//! ```
//!
//! where `f` is taken in its left-continuous version. This module computes
//! the Vitali-type variation `V_f = sup_P sum |mu(cell)|` over dyadically
//! refined partitions, the Jordan decomposition of `f` into a difference of
//! two surfaces with nonnegative rectangle increments on a quarter space,
//! and one- and two-parameter Lebesgue-Stieltjes integrals with lower-left
//! corner evaluation (consistent with the half-open cell convention above).
//!
//! Conventions used throughout:
//!
//! * the integrand `g` is evaluated at the lower-left corner of each cell;
//! * surface increments use left limits, so an atom of the measure sitting
//!   exactly on a grid line is charged to the cell whose lower-left corner
//!   touches it;
//! * refinement is dyadic and always includes any coordinates declared in
//!   the surface's [`JumpSet`], so atoms and kink lines are resolved exactly
//!   once the initial partition is built;
//! * first-order corner sums are accelerated by Richardson extrapolation on
//!   the dyadic ladder (the raw sums remain available in traces).

use std::sync::Arc;

use thiserror::Error;

pub mod grid;

/// Step used by the diagonal left-limit fallback when a surface declares no
/// analytic left evaluator and no grid; partition-driven code overrides this
/// with the local grid step.
pub const DEFAULT_LEFT_STEP: f64 = 1.490_116_119_384_765_6e-8; // 2^-26

#[derive(Debug, Error)]
pub enum Bv2dError {
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("integral did not converge: last two estimates {prev} and {last}")]
    NotConverged { prev: f64, last: f64 },
    #[error("bad grid data: {0}")]
    GridFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed rectangle `[s_lo, s_hi] x [x_lo, x_hi]` in (time, space).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub s_lo: f64,
    pub s_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Rect {
    pub fn new(s_lo: f64, s_hi: f64, x_lo: f64, x_hi: f64) -> Result<Self, Bv2dError> {
        if !(s_lo.is_finite() && s_hi.is_finite() && x_lo.is_finite() && x_hi.is_finite()) {
            return Err(Bv2dError::InvalidRect("non-finite corner".into()));
        }
        if s_hi < s_lo || x_hi < x_lo {
            return Err(Bv2dError::InvalidRect(format!(
                "need s_hi >= s_lo and x_hi >= x_lo, got [{s_lo},{s_hi}]x[{x_lo},{x_hi}]"
            )));
        }
        Ok(Rect { s_lo, s_hi, x_lo, x_hi })
    }

    pub fn s_span(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    pub fn x_span(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

/// Declared jump coordinates of a surface: vertical lines `s = const` and
/// horizontal lines `x = const` where the surface (or its sections) may jump.
#[derive(Debug, Clone, Default)]
pub struct JumpSet {
    pub s_lines: Vec<f64>,
    pub x_lines: Vec<f64>,
}

impl JumpSet {
    pub fn none() -> Self {
        JumpSet::default()
    }

    pub fn new(s_lines: Vec<f64>, x_lines: Vec<f64>) -> Self {
        JumpSet { s_lines, x_lines }
    }

    pub fn x_only(x_lines: Vec<f64>) -> Self {
        JumpSet { s_lines: Vec::new(), x_lines }
    }

    pub fn is_empty(&self) -> bool {
        self.s_lines.is_empty() && self.x_lines.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Analytic,
    GridSampled,
}

#[derive(Clone)]
enum LeftLimit {
    /// The function is left continuous (or continuous); left value = value.
    SameAsEval,
    /// Analytic joint left limit supplied by the caller.
    Analytic(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    /// Approximate the joint left limit by evaluating at `(s - h, x - h)`.
    Diagonal,
}

/// A two-variable function with one-sided evaluation and BV metadata.
///
/// `eval_left` is the limit from below in both variables together, which is
/// the value the induced Lebesgue-Stieltjes measure sees at a corner.
#[derive(Clone)]
pub struct Surface2D {
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    left: LeftLimit,
    grid: Option<Arc<grid::GridData>>,
    jumps: JumpSet,
    kind: SurfaceKind,
}

impl std::fmt::Debug for Surface2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Surface2D")
            .field("kind", &self.kind)
            .field("jumps", &self.jumps)
            .finish_non_exhaustive()
    }
}

impl Surface2D {
    /// Analytic surface that is left continuous, so the left value equals
    /// the value. Use [`Surface2D::analytic_with_left`] when it does not.
    pub fn analytic(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Surface2D {
            eval: Arc::new(f),
            left: LeftLimit::SameAsEval,
            grid: None,
            jumps: JumpSet::none(),
            kind: SurfaceKind::Analytic,
        }
    }

    /// Analytic surface with an exact joint left-limit evaluator.
    pub fn analytic_with_left(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_left: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Surface2D {
            eval: Arc::new(f),
            left: LeftLimit::Analytic(Arc::new(f_left)),
            grid: None,
            jumps: JumpSet::none(),
            kind: SurfaceKind::Analytic,
        }
    }

    /// Analytic surface whose left limits are approximated diagonally at
    /// `(s - h, x - h)` with `h` one grid step of the active partition.
    pub fn analytic_diagonal(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Surface2D {
            eval: Arc::new(f),
            left: LeftLimit::Diagonal,
            grid: None,
            jumps: JumpSet::none(),
            kind: SurfaceKind::Analytic,
        }
    }

    pub fn constant(k: f64) -> Self {
        Surface2D::analytic(move |_, _| k)
    }

    /// Grid-sampled surface: piecewise constant on half-open node cells,
    /// cadlag in each variable, with exact left limits.
    pub fn from_grid(data: grid::GridData) -> Self {
        let data = Arc::new(data);
        let jumps = JumpSet::new(data.s_nodes().to_vec(), data.x_nodes().to_vec());
        let d = Arc::clone(&data);
        Surface2D {
            eval: Arc::new(move |s, x| d.value(s, x)),
            left: LeftLimit::SameAsEval, // placeholder; grid lookups take priority
            grid: Some(data),
            jumps,
            kind: SurfaceKind::GridSampled,
        }
    }

    pub fn with_jumps(mut self, jumps: JumpSet) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn jumps(&self) -> &JumpSet {
        &self.jumps
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn eval(&self, s: f64, x: f64) -> f64 {
        (self.eval)(s, x)
    }

    /// Joint left limit at `(s, x)` using the default fallback step.
    pub fn eval_left(&self, s: f64, x: f64) -> f64 {
        self.eval_left_h(s, x, DEFAULT_LEFT_STEP)
    }

    /// Joint left limit with an explicit fallback step for the diagonal
    /// approximation. Exact evaluators ignore `h`.
    pub fn eval_left_h(&self, s: f64, x: f64, h: f64) -> f64 {
        if let Some(g) = &self.grid {
            return g.value_left(s, x);
        }
        match &self.left {
            LeftLimit::SameAsEval => (self.eval)(s, x),
            LeftLimit::Analytic(fl) => fl(s, x),
            LeftLimit::Diagonal => (self.eval)(s - h, x - h),
        }
    }

    /// Default absolute convergence tolerance for refinement loops.
    pub fn default_tolerance(&self) -> f64 {
        match self.kind {
            SurfaceKind::Analytic => 1e-8,
            SurfaceKind::GridSampled => 1e-4,
        }
    }
}

/// Partition of a rectangle: strictly increasing coordinates on both axes,
/// first and last matching the rectangle corners.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition2D {
    s_points: Vec<f64>,
    x_points: Vec<f64>,
}

fn check_axis(points: &[f64], axis: &str) -> Result<(), Bv2dError> {
    if points.len() < 2 {
        return Err(Bv2dError::InvalidPartition(format!(
            "{axis} axis needs at least two points"
        )));
    }
    for w in points.windows(2) {
        // NaN coordinates must fail this comparison too
        let increasing = w[1] > w[0];
        if !increasing {
            return Err(Bv2dError::InvalidPartition(format!(
                "{axis} axis not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Merges extra coordinates into a sorted axis, skipping near-duplicates
/// and values outside the open interval spanned by the axis.
pub fn merge_points(points: &mut Vec<f64>, extra: &[f64]) {
    insert_interior(points, extra);
}

fn insert_interior(points: &mut Vec<f64>, extra: &[f64]) {
    if extra.is_empty() {
        return;
    }
    let lo = points[0];
    let hi = *points.last().unwrap();
    let eps = (hi - lo).abs().max(1.0) * 1e-13;
    for &p in extra {
        if p <= lo + eps || p >= hi - eps {
            continue;
        }
        match points.binary_search_by(|q| q.partial_cmp(&p).unwrap()) {
            Ok(_) => {}
            Err(i) => {
                if (points[i] - p).abs() > eps && (p - points[i - 1]).abs() > eps {
                    points.insert(i, p);
                }
            }
        }
    }
}

impl Partition2D {
    pub fn new(s_points: Vec<f64>, x_points: Vec<f64>) -> Result<Self, Bv2dError> {
        check_axis(&s_points, "s")?;
        check_axis(&x_points, "x")?;
        Ok(Partition2D { s_points, x_points })
    }

    /// Uniform dyadic partition of `r` with `2^level` cells per axis,
    /// augmented with any declared jump coordinates inside `r`.
    pub fn dyadic(r: &Rect, level: u32, jumps: &JumpSet) -> Self {
        let n = 1usize << level;
        let mut s_points: Vec<f64> = if r.s_span() == 0.0 {
            vec![r.s_lo, r.s_lo]
        } else {
            (0..=n)
                .map(|i| r.s_lo + r.s_span() * (i as f64) / (n as f64))
                .collect()
        };
        let mut x_points: Vec<f64> = if r.x_span() == 0.0 {
            vec![r.x_lo, r.x_lo]
        } else {
            (0..=n)
                .map(|i| r.x_lo + r.x_span() * (i as f64) / (n as f64))
                .collect()
        };
        if r.s_span() > 0.0 {
            insert_interior(&mut s_points, &jumps.s_lines);
        }
        if r.x_span() > 0.0 {
            insert_interior(&mut x_points, &jumps.x_lines);
        }
        // Degenerate rectangles keep a doubled coordinate; collapse it.
        s_points.dedup();
        x_points.dedup();
        if s_points.len() < 2 {
            s_points.push(s_points[0]);
        }
        if x_points.len() < 2 {
            x_points.push(x_points[0]);
        }
        Partition2D { s_points, x_points }
    }

    /// Refinement inserting the midpoint of every interval on both axes.
    /// Existing points (and hence jump coordinates) are preserved, so the
    /// partition variation can only grow.
    pub fn refined(&self) -> Self {
        Partition2D {
            s_points: refine_axis(&self.s_points),
            x_points: refine_axis(&self.x_points),
        }
    }

    pub fn s_points(&self) -> &[f64] {
        &self.s_points
    }

    pub fn x_points(&self) -> &[f64] {
        &self.x_points
    }

    pub fn n_cells(&self) -> u64 {
        ((self.s_points.len() - 1) as u64) * ((self.x_points.len() - 1) as u64)
    }

    pub fn rect(&self) -> Rect {
        Rect {
            s_lo: self.s_points[0],
            s_hi: *self.s_points.last().unwrap(),
            x_lo: self.x_points[0],
            x_hi: *self.x_points.last().unwrap(),
        }
    }
}

fn refine_axis(points: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len() * 2 - 1);
    for w in points.windows(2) {
        out.push(w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        if mid > w[0] && mid < w[1] {
            out.push(mid);
        }
    }
    out.push(*points.last().unwrap());
    out
}

/// Controls the refinement loops of [`variation`], [`ls_integral_2d`] and
/// [`ls_integral_1d`].
#[derive(Debug, Clone)]
pub struct RefinementPolicy {
    /// Absolute convergence tolerance; `None` uses the surface default
    /// (1e-8 analytic, 1e-4 grid-sampled).
    pub tolerance: Option<f64>,
    /// Initial partition has `2^initial_level` cells per axis.
    pub initial_level: u32,
    /// Refinement stops (non-converged) once the next partition would
    /// exceed this many cells.
    pub max_cells: u64,
    /// Richardson-extrapolate the dyadic ladder of corner sums. Raw sums
    /// converge first order in the mesh; extrapolation removes the leading
    /// terms and is what the convergence test inspects.
    pub accelerate: bool,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        RefinementPolicy {
            tolerance: None,
            initial_level: 3,
            max_cells: 1 << 24,
            accelerate: true,
        }
    }
}

impl RefinementPolicy {
    pub fn with_tolerance(tol: f64) -> Self {
        RefinementPolicy { tolerance: Some(tol), ..Default::default() }
    }
}

/// Result of a variation computation over the refinement ladder.
#[derive(Debug, Clone)]
pub struct VariationResult {
    /// Best estimate of `V_f` (extrapolated when acceleration is on).
    pub value: f64,
    /// `(cell count, raw partition variation)` per refinement level; raw
    /// values are nondecreasing because each level refines the previous.
    pub refinement_trace: Vec<(u64, f64)>,
    pub converged: bool,
    pub tolerance: f64,
}

/// Richardson extrapolation of a dyadic ladder `e_k = I + c1*2^-k + c2*4^-k + ...`.
/// Returns the highest-order entry available (up to two stages).
fn extrapolate(raw: &[f64]) -> f64 {
    match raw.len() {
        0 => f64::NAN,
        1 => raw[0],
        2 => 2.0 * raw[1] - raw[0],
        _ => {
            let n = raw.len();
            let b1 = 2.0 * raw[n - 2] - raw[n - 3];
            let b2 = 2.0 * raw[n - 1] - raw[n - 2];
            (4.0 * b2 - b1) / 3.0
        }
    }
}

/// Node matrix of left values of `f` on partition `p`, row-major in `s`.
fn node_matrix(f: &Surface2D, p: &Partition2D) -> Vec<f64> {
    let sp = p.s_points();
    let xp = p.x_points();
    let ns = sp.len();
    let nx = xp.len();
    let mut out = vec![0.0; ns * nx];
    let needs_h = matches!(f.left, LeftLimit::Diagonal) && f.grid.is_none();
    for (i, &s) in sp.iter().enumerate() {
        let hs = if i > 0 { sp[i] - sp[i - 1] } else { sp[1] - sp[0] };
        for (j, &x) in xp.iter().enumerate() {
            let h = if needs_h {
                let hx = if j > 0 { xp[j] - xp[j - 1] } else { xp[1] - xp[0] };
                hs.min(hx)
            } else {
                DEFAULT_LEFT_STEP
            };
            out[i * nx + j] = f.eval_left_h(s, x, h);
        }
    }
    out
}

fn cell_increment(nodes: &[f64], nx: usize, i: usize, j: usize) -> f64 {
    nodes[(i + 1) * nx + (j + 1)] - nodes[(i + 1) * nx + j] - nodes[i * nx + (j + 1)]
        + nodes[i * nx + j]
}

/// Signed rectangle increment of the left-continuous version of `f` over `r`.
///
/// This is the measure the surface assigns to the half-open rectangle
/// `[s_lo, s_hi) x [x_lo, x_hi)`.
pub fn rect_increment(f: &Surface2D, r: &Rect) -> f64 {
    let h = (r.s_span().min(r.x_span())).max(DEFAULT_LEFT_STEP);
    f.eval_left_h(r.s_hi, r.x_hi, h) - f.eval_left_h(r.s_hi, r.x_lo, h)
        - f.eval_left_h(r.s_lo, r.x_hi, h)
        + f.eval_left_h(r.s_lo, r.x_lo, h)
}

/// Partition variation `V_P(f)`: the sum of absolute rectangle increments
/// over the cells of `p`.
pub fn variation_on(f: &Surface2D, p: &Partition2D) -> f64 {
    let nodes = node_matrix(f, p);
    let nx = p.x_points().len();
    let mut acc = 0.0;
    for i in 0..p.s_points().len() - 1 {
        for j in 0..nx - 1 {
            acc += cell_increment(&nodes, nx, i, j).abs();
        }
    }
    acc
}

/// Corner sum `sum g(lower-left corner) * mu(cell)` over the cells of `p`.
///
/// When `g` is constant on every half-open cell of `p` this equals the
/// Lebesgue-Stieltjes integral exactly, by additivity of the measure.
#[allow(clippy::needless_range_loop)]
pub fn ls_sum_2d(g: &dyn Fn(f64, f64) -> f64, f: &Surface2D, p: &Partition2D) -> f64 {
    let nodes = node_matrix(f, p);
    let sp = p.s_points();
    let xp = p.x_points();
    let nx = xp.len();
    let mut acc = 0.0;
    for i in 0..sp.len() - 1 {
        for j in 0..nx - 1 {
            let inc = cell_increment(&nodes, nx, i, j);
            if inc != 0.0 {
                acc += g(sp[i], xp[j]) * inc;
            }
        }
    }
    acc
}

/// Variation `V_f(r) = sup_P V_P` approximated over the dyadic ladder.
///
/// The supremum is approached from below (refinement can only increase
/// `V_P`); a non-converged result carries the last estimate and is reported,
/// not fatal.
pub fn variation(f: &Surface2D, r: &Rect, policy: &RefinementPolicy) -> VariationResult {
    let tol = policy.tolerance.unwrap_or_else(|| f.default_tolerance());
    let mut p = Partition2D::dyadic(r, policy.initial_level, f.jumps());
    let mut raw: Vec<f64> = Vec::new();
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut estimates: Vec<f64> = Vec::new();
    loop {
        let mut v = variation_on(f, &p);
        if let Some(&last) = raw.last() {
            // Exact refinements cannot decrease V_P; absorb float noise.
            if v < last {
                debug_assert!(last - v <= 1e-12 * (1.0 + last.abs()));
                v = last;
            }
        }
        raw.push(v);
        trace.push((p.n_cells(), v));
        let est = if policy.accelerate { extrapolate(&raw) } else { v };
        estimates.push(est);
        let k = estimates.len();
        if k >= 2 && (estimates[k - 1] - estimates[k - 2]).abs() <= tol {
            return VariationResult {
                value: estimates[k - 1],
                refinement_trace: trace,
                converged: true,
                tolerance: tol,
            };
        }
        let next = p.refined();
        if next.n_cells() > policy.max_cells {
            return VariationResult {
                value: *estimates.last().unwrap(),
                refinement_trace: trace,
                converged: false,
                tolerance: tol,
            };
        }
        p = next;
    }
}

/// Jordan decomposition of `f` on the quarter space anchored at the lower
/// left corner of `r`.
#[derive(Debug, Clone)]
pub struct JordanPair {
    /// `(V + f)/2`: nonnegative rectangle increments on every grid cell.
    pub f1: Surface2D,
    /// `(V - f)/2`: nonnegative rectangle increments on every grid cell.
    pub f2: Surface2D,
    /// Base point `(t, a)` of the quarter space `s >= t, x >= a`.
    pub base: (f64, f64),
    /// Variation run backing the decomposition; a non-converged variation
    /// propagates here as a non-converged decomposition.
    pub variation: VariationResult,
}

/// Decomposes `f = f1 - f2` with `f1 = (V + f)/2`, `f2 = (V - f)/2`, where
/// `V(s, x)` is the variation of `f` on `[t, s] x [a, x]` accumulated on the
/// final refinement partition.
///
/// Both members are realized as grid surfaces on that partition, taking the
/// left-continuous node values of `f`, so `f1 - f2` reproduces the
/// left-continuous version of `f` at every node and the cell increments of
/// `f1` and `f2` are `(|mu| + mu)/2 >= 0` and `(|mu| - mu)/2 >= 0` exactly.
pub fn jordan_decompose(f: &Surface2D, r: &Rect, policy: &RefinementPolicy) -> JordanPair {
    let tol = policy.tolerance.unwrap_or_else(|| f.default_tolerance());
    let var = variation(f, r, policy);
    // Rebuild the final partition at the depth the variation run reached.
    let levels = var.refinement_trace.len() as u32 - 1;
    let p = {
        let mut p = Partition2D::dyadic(r, policy.initial_level, f.jumps());
        for _ in 0..levels {
            p = p.refined();
        }
        p
    };
    let nodes = node_matrix(f, &p);
    let sp = p.s_points();
    let xp = p.x_points();
    let (ns, nx) = (sp.len(), xp.len());
    // Prefix sums of |mu| give V on [base, node] for every node.
    let mut vmat = vec![0.0; ns * nx];
    for i in 1..ns {
        let mut row_acc = 0.0;
        for j in 1..nx {
            row_acc += cell_increment(&nodes, nx, i - 1, j - 1).abs();
            vmat[i * nx + j] = vmat[(i - 1) * nx + j] + row_acc;
        }
    }
    let mut v1 = vec![0.0; ns * nx];
    let mut v2 = vec![0.0; ns * nx];
    for k in 0..ns * nx {
        v1[k] = 0.5 * (vmat[k] + nodes[k]);
        v2[k] = 0.5 * (vmat[k] - nodes[k]);
    }
    let mk = |values: Vec<f64>| {
        Surface2D::from_grid(
            grid::GridData::from_nodes(sp.to_vec(), xp.to_vec(), values)
                .expect("partition nodes are strictly increasing"),
        )
    };
    JordanPair {
        f1: mk(v1),
        f2: mk(v2),
        base: (r.s_lo, r.x_lo),
        variation: VariationResult { tolerance: tol, ..var },
    }
}

/// Two-parameter Lebesgue-Stieltjes integral of `g` against the measure of
/// `f` over `r`, by refined corner sums with Richardson acceleration.
///
/// `g` should be bounded and continuous except on a set the measure does not
/// charge; atoms on declared jump lines are charged `g` at the line itself.
pub fn ls_integral_2d(
    g: &dyn Fn(f64, f64) -> f64,
    f: &Surface2D,
    r: &Rect,
    policy: &RefinementPolicy,
) -> Result<f64, Bv2dError> {
    let tol = policy.tolerance.unwrap_or_else(|| f.default_tolerance());
    let mut p = Partition2D::dyadic(r, policy.initial_level, f.jumps());
    let mut raw: Vec<f64> = Vec::new();
    let mut estimates: Vec<f64> = Vec::new();
    loop {
        raw.push(ls_sum_2d(g, f, &p));
        let est = if policy.accelerate { extrapolate(&raw) } else { *raw.last().unwrap() };
        estimates.push(est);
        let k = estimates.len();
        if k >= 2 && (estimates[k - 1] - estimates[k - 2]).abs() <= tol {
            return Ok(estimates[k - 1]);
        }
        let next = p.refined();
        if next.n_cells() > policy.max_cells {
            return Err(Bv2dError::NotConverged {
                prev: estimates[k.saturating_sub(2)],
                last: estimates[k - 1],
            });
        }
        p = next;
    }
}

/// One-variable function with optional exact left limits and declared jumps,
/// the integrator side of [`ls_integral_1d`].
#[derive(Clone)]
pub struct Function1D {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    left: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    jumps: Vec<f64>,
}

impl Function1D {
    /// Left-continuous function: left value = value.
    pub fn continuous(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Function1D { eval: Arc::new(f), left: None, jumps: Vec::new() }
    }

    pub fn with_left(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_left: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Function1D { eval: Arc::new(f), left: Some(Arc::new(f_left)), jumps: Vec::new() }
    }

    pub fn with_jumps(mut self, jumps: Vec<f64>) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn eval_left(&self, x: f64) -> f64 {
        match &self.left {
            Some(fl) => fl(x),
            None => (self.eval)(x),
        }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }
}

/// Left-endpoint Stieltjes sum `sum g(x_i) * (h(x_{i+1}-) - h(x_i-))` over
/// consecutive points. Exact when `g` is constant on each half-open cell.
pub fn ls_sum_1d(g: &dyn Fn(f64) -> f64, h: &Function1D, points: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut prev = h.eval_left(points[0]);
    for w in points.windows(2) {
        let next = h.eval_left(w[1]);
        let inc = next - prev;
        if inc != 0.0 {
            acc += g(w[0]) * inc;
        }
        prev = next;
    }
    acc
}

fn variation_1d_on(h: &Function1D, points: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut prev = h.eval_left(points[0]);
    for &p in &points[1..] {
        let next = h.eval_left(p);
        acc += (next - prev).abs();
        prev = next;
    }
    acc
}

fn axis_points(interval: (f64, f64), level: u32, jumps: &[f64]) -> Vec<f64> {
    let (a, b) = interval;
    let n = 1usize << level;
    let mut pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    insert_interior(&mut pts, jumps);
    pts
}

/// One-parameter Riemann-Stieltjes integral of `g` against the
/// left-continuous BV function `h` over `interval`, with lower-endpoint
/// evaluation: a jump of `h` at an interior point `x0` contributes
/// `g(x0) * (h(x0+) - h(x0))`.
pub fn ls_integral_1d(
    g: &dyn Fn(f64) -> f64,
    h: &Function1D,
    interval: (f64, f64),
    policy: &RefinementPolicy,
) -> Result<f64, Bv2dError> {
    let ordered = interval.1 >= interval.0;
    if !ordered {
        return Err(Bv2dError::InvalidRect(format!(
            "bad interval [{}, {}]",
            interval.0, interval.1
        )));
    }
    let tol = policy.tolerance.unwrap_or(1e-8);
    let mut points = axis_points(interval, policy.initial_level, h.jumps());
    let mut raw: Vec<f64> = Vec::new();
    let mut estimates: Vec<f64> = Vec::new();
    loop {
        raw.push(ls_sum_1d(g, h, &points));
        let est = if policy.accelerate { extrapolate(&raw) } else { *raw.last().unwrap() };
        estimates.push(est);
        let k = estimates.len();
        if k >= 2 && (estimates[k - 1] - estimates[k - 2]).abs() <= tol {
            return Ok(estimates[k - 1]);
        }
        if (points.len() as u64 - 1) * 2 > policy.max_cells {
            return Err(Bv2dError::NotConverged {
                prev: estimates[k.saturating_sub(2)],
                last: estimates[k - 1],
            });
        }
        points = refine_axis(&points);
    }
}

/// Variation of the section `x -> f(s, x)` on `interval` for fixed `s`.
///
/// Kept separate from the two-parameter variation on purpose: `V_f = 0` does
/// not control sectional variation (a surface `f(s, x) = b(x)` has zero
/// rectangle increments for any `b`), so neither quantity is ever inferred
/// from the other.
pub fn sectional_variation(
    f: &Surface2D,
    s: f64,
    interval: (f64, f64),
    policy: &RefinementPolicy,
) -> VariationResult {
    let tol = policy.tolerance.unwrap_or_else(|| f.default_tolerance());
    let section = section_of(f, s);
    let mut points = axis_points(interval, policy.initial_level, section.jumps());
    let mut raw: Vec<f64> = Vec::new();
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut estimates: Vec<f64> = Vec::new();
    loop {
        let mut v = variation_1d_on(&section, &points);
        if let Some(&last) = raw.last() {
            if v < last {
                v = last;
            }
        }
        raw.push(v);
        trace.push((points.len() as u64 - 1, v));
        let est = if policy.accelerate { extrapolate(&raw) } else { v };
        estimates.push(est);
        let k = estimates.len();
        if k >= 2 && (estimates[k - 1] - estimates[k - 2]).abs() <= tol {
            return VariationResult {
                value: estimates[k - 1],
                refinement_trace: trace,
                converged: true,
                tolerance: tol,
            };
        }
        if (points.len() as u64 - 1) * 2 > policy.max_cells {
            return VariationResult {
                value: *estimates.last().unwrap(),
                refinement_trace: trace,
                converged: false,
                tolerance: tol,
            };
        }
        points = refine_axis(&points);
    }
}

/// Section of a surface at fixed time, with left-in-x limits as exact as the
/// surface allows (grids are exact; analytic joint-left evaluators are used
/// as the section's left values).
pub fn section_of(f: &Surface2D, s: f64) -> Function1D {
    let jumps = f.jumps().x_lines.clone();
    if let Some(g) = &f.grid {
        let g1 = Arc::clone(g);
        let g2 = Arc::clone(g);
        return Function1D {
            eval: Arc::new(move |x| g1.value(s, x)),
            left: Some(Arc::new(move |x| g2.value_section_left(s, x))),
            jumps,
        };
    }
    let e = Arc::clone(&f.eval);
    let left: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match &f.left {
        LeftLimit::SameAsEval => {
            let e = Arc::clone(&f.eval);
            Arc::new(move |x| e(s, x))
        }
        LeftLimit::Analytic(fl) => {
            let fl = Arc::clone(fl);
            Arc::new(move |x| fl(s, x))
        }
        LeftLimit::Diagonal => {
            let e = Arc::clone(&f.eval);
            Arc::new(move |x| e(s, x - DEFAULT_LEFT_STEP))
        }
    };
    Function1D { eval: Arc::new(move |x| e(s, x)), left: Some(left), jumps }
}
