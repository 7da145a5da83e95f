//! Simulation of continuous semimartingales on uniform time grids.
//!
//! A path is stored as its decomposition `X = X(0) + M + V` together with
//! the realized quadratic variation of the martingale part. Brownian motion
//! is simulated exactly at the grid points; Ito processes use the
//! Euler-Maruyama scheme. All randomness comes from ChaCha12 streams keyed
//! by `(seed, stream)`, so paths are bit-reproducible across runs and
//! machines.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Identifier of the generator recorded in outputs.
pub const RNG_ALGORITHM: &str = "chacha12";

#[derive(Debug, Error)]
pub enum PathError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
    #[error("coefficient bound violated at (t={t}, x={x}): {detail}")]
    CoefficientBound { t: f64, x: f64, detail: String },
}

/// Uniform grid `t_k = k * horizon / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, PathError> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(PathError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 1 {
            return Err(PathError::InvalidGrid("need at least one step".into()));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }
}

/// Discretized continuous semimartingale with its decomposition and
/// realized quadratic variation.
///
/// `x[k] = x0 + m[k] + v[k]` holds bit-exactly at every grid point because
/// `x` is defined that way at construction.
#[derive(Debug, Clone)]
pub struct SemimartingalePath {
    grid: TimeGrid,
    x0: f64,
    x: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    qv: Vec<f64>,
    seed: u64,
}

impl SemimartingalePath {
    /// Assembles a path from its parts; `x` is derived as `x0 + m + v`.
    pub fn from_parts(
        grid: TimeGrid,
        x0: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        qv: Vec<f64>,
        seed: u64,
    ) -> Result<Self, PathError> {
        let n = grid.n_points();
        for (name, len) in [("m", m.len()), ("v", v.len()), ("qv", qv.len())] {
            if len != n {
                return Err(PathError::InvalidGrid(format!(
                    "{name} has {len} points, grid needs {n}"
                )));
            }
        }
        if m[0] != 0.0 || v[0] != 0.0 || qv[0] != 0.0 {
            return Err(PathError::InvalidGrid("m, v and qv must start at 0".into()));
        }
        if qv.windows(2).any(|w| w[1] < w[0]) {
            return Err(PathError::InvalidGrid("qv must be nondecreasing".into()));
        }
        let x = m.iter().zip(&v).map(|(&mk, &vk)| x0 + mk + vk).collect();
        Ok(SemimartingalePath { grid, x0, x, m, v, qv, seed })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn qv(&self) -> &[f64] {
        &self.qv
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn min_x(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_x(&self) -> f64 {
        self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Path restricted to the first `k` steps (a shorter uniform grid with
    /// the same spacing).
    pub fn truncated(&self, k: usize) -> SemimartingalePath {
        let k = k.min(self.grid.n_steps).max(1);
        let grid = TimeGrid { horizon: self.grid.t(k), n_steps: k };
        SemimartingalePath {
            grid,
            x0: self.x0,
            x: self.x[..=k].to_vec(),
            m: self.m[..=k].to_vec(),
            v: self.v[..=k].to_vec(),
            qv: self.qv[..=k].to_vec(),
            seed: self.seed,
        }
    }

    /// CSV export with columns `t,X,M,V,qv`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,X,M,V,qv")?;
        for k in 0..self.grid.n_points() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.grid.t(k),
                self.x[k],
                self.m[k],
                self.v[k],
                self.qv[k]
            )?;
        }
        Ok(())
    }

    /// JSON sidecar echoing the provenance of the path.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({
            "rng": RNG_ALGORITHM,
            "seed": self.seed,
            "horizon": self.grid.horizon(),
            "n_steps": self.grid.n_steps(),
            "x0": self.x0,
        })
        .to_string()
    }
}

/// Deterministic stream for `(seed, stream)`; used path-by-path so Monte
/// Carlo batches are reproducible and order-independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard Brownian motion sampled exactly at the grid points: `V = 0` and
/// `qv` is the realized sum of squared increments.
pub fn simulate_bm(grid: &TimeGrid, seed: u64) -> SemimartingalePath {
    simulate_bm_stream(grid, seed, 0)
}

pub fn simulate_bm_stream(grid: &TimeGrid, seed: u64, stream: u64) -> SemimartingalePath {
    let mut rng = rng_for(seed, stream);
    let sqrt_dt = grid.dt().sqrt();
    let n = grid.n_steps;
    let mut m = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    m.push(0.0);
    qv.push(0.0);
    for k in 0..n {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        m.push(m[k] + dw);
        qv.push(qv[k] + dw * dw);
    }
    let v = vec![0.0; n + 1];
    SemimartingalePath::from_parts(*grid, 0.0, m, v, qv, seed)
        .expect("internally consistent parts")
}

/// Ito process coefficients `sigma(t, x)` and `b(t, x)` with uniform
/// ellipticity `sigma >= delta > 0` and bound `|sigma| + |b| <= K`.
#[derive(Clone)]
pub struct ItoProcessSpec {
    sigma: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    b: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub x0: f64,
    pub delta: f64,
    pub k_bound: f64,
}

impl std::fmt::Debug for ItoProcessSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ItoProcessSpec")
            .field("x0", &self.x0)
            .field("delta", &self.delta)
            .field("k_bound", &self.k_bound)
            .finish_non_exhaustive()
    }
}

impl ItoProcessSpec {
    pub fn new(
        sigma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        x0: f64,
        delta: f64,
        k_bound: f64,
    ) -> Result<Self, PathError> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(PathError::CoefficientBound {
                t: 0.0,
                x: x0,
                detail: format!("delta must be positive, got {delta}"),
            });
        }
        Ok(ItoProcessSpec { sigma: Arc::new(sigma), b: Arc::new(b), x0, delta, k_bound })
    }

    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        (self.sigma)(t, x)
    }

    pub fn b(&self, t: f64, x: f64) -> f64 {
        (self.b)(t, x)
    }

    /// Spot-checks `delta <= sigma <= K` and `|b| <= K` on a sample grid
    /// over the given domain.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate_on(
        &self,
        t_range: (f64, f64),
        x_range: (f64, f64),
        samples_per_axis: usize,
    ) -> Result<(), PathError> {
        let n = samples_per_axis.max(2);
        for i in 0..n {
            let t = t_range.0 + (t_range.1 - t_range.0) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let x = x_range.0 + (x_range.1 - x_range.0) * j as f64 / (n - 1) as f64;
                let s = self.sigma(t, x);
                let b = self.b(t, x);
                if !(s >= self.delta) {
                    // negated on purpose: a NaN coefficient must fail
                    return Err(PathError::CoefficientBound {
                        t,
                        x,
                        detail: format!("sigma = {s} < delta = {}", self.delta),
                    });
                }
                if s > self.k_bound || b.abs() > self.k_bound {
                    return Err(PathError::CoefficientBound {
                        t,
                        x,
                        detail: format!(
                            "sigma = {s}, |b| = {} exceed K = {}",
                            b.abs(),
                            self.k_bound
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Euler-Maruyama path of an Ito process.
///
/// `M` accumulates `sigma * dW`, `V` accumulates `b * dt`, and `qv` is the
/// analytic `sum sigma^2 dt` (exact for the scheme and lower variance than
/// squared increments).
pub fn simulate_ito(
    spec: &ItoProcessSpec,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
) -> Result<SemimartingalePath, PathError> {
    let mut rng = rng_for(seed, stream);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let n = grid.n_steps;
    let mut m = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    m.push(0.0);
    v.push(0.0);
    qv.push(0.0);
    for k in 0..n {
        let t = grid.t(k);
        let xk = spec.x0 + m[k] + v[k];
        let s = spec.sigma(t, xk);
        let b = spec.b(t, xk);
        if !s.is_finite() || !b.is_finite() {
            return Err(PathError::NonFinite {
                step: k,
                detail: format!("coefficients at (t={t}, x={xk}): sigma={s}, b={b}"),
            });
        }
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let m_next = m[k] + s * dw;
        let v_next = v[k] + b * dt;
        if !m_next.is_finite() || !v_next.is_finite() {
            return Err(PathError::NonFinite {
                step: k,
                detail: format!("path diverged: m={m_next}, v={v_next}"),
            });
        }
        m.push(m_next);
        v.push(v_next);
        qv.push(qv[k] + s * s * dt);
    }
    SemimartingalePath::from_parts(*grid, spec.x0, m, v, qv, seed)
}

/// Left-endpoint stochastic integral `sum h(t_k) (X(t_{k+1}) - X(t_k))`.
/// `h` holds one value per grid point; the last one is unused.
pub fn ito_integral(h: &[f64], path: &SemimartingalePath) -> Result<f64, PathError> {
    integral_against(h, path.x())
}

/// Integral against the martingale part only.
pub fn ito_integral_dm(h: &[f64], path: &SemimartingalePath) -> Result<f64, PathError> {
    integral_against(h, path.m())
}

/// Integral against the bounded-variation part only.
pub fn ito_integral_dv(h: &[f64], path: &SemimartingalePath) -> Result<f64, PathError> {
    integral_against(h, path.v())
}

fn integral_against(h: &[f64], target: &[f64]) -> Result<f64, PathError> {
    if h.len() != target.len() {
        return Err(PathError::LengthMismatch { expected: target.len(), got: h.len() });
    }
    let mut acc = 0.0;
    for k in 0..target.len() - 1 {
        acc += h[k] * (target[k + 1] - target[k]);
    }
    Ok(acc)
}

/// Running integral: entry `k` is the integral over `[0, t_k]`.
pub fn ito_integral_prefix(h: &[f64], path: &SemimartingalePath) -> Result<Vec<f64>, PathError> {
    let x = path.x();
    if h.len() != x.len() {
        return Err(PathError::LengthMismatch { expected: x.len(), got: h.len() });
    }
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for k in 0..x.len() - 1 {
        out.push(out[k] + h[k] * (x[k + 1] - x[k]));
    }
    Ok(out)
}

/// Continuous curve of locally bounded variation, used to recentre paths.
#[derive(Clone)]
pub struct Curve {
    l: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    tv: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for Curve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Curve").finish_non_exhaustive()
    }
}

impl Curve {
    pub fn new(l: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Curve { l: Arc::new(l), tv: None }
    }

    /// Attaches an analytic total-variation evaluator `t -> TV(l, [0, t])`.
    pub fn with_total_variation(
        l: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Curve { l: Arc::new(l), tv: Some(Arc::new(tv)) }
    }

    pub fn constant(c: f64) -> Self {
        Curve { l: Arc::new(move |_| c), tv: Some(Arc::new(|_| 0.0)) }
    }

    pub fn zero() -> Self {
        Curve::constant(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.l)(t)
    }

    /// Total variation on `[0, t]`, analytic when supplied, else a fine
    /// polygonal approximation.
    pub fn total_variation(&self, t: f64) -> f64 {
        if let Some(tv) = &self.tv {
            return tv(t);
        }
        let n = 1 << 16;
        let mut acc = 0.0;
        let mut prev = self.eval(0.0);
        for k in 1..=n {
            let cur = self.eval(t * k as f64 / n as f64);
            acc += (cur - prev).abs();
            prev = cur;
        }
        acc
    }
}

/// Recentres a path along a curve: `X* = X - l`, with the curve absorbed
/// into the bounded-variation part. The martingale part and `qv` are
/// untouched.
pub fn shift_by_curve(path: &SemimartingalePath, curve: &Curve) -> SemimartingalePath {
    let grid = *path.grid();
    let l0 = curve.eval(0.0);
    let v: Vec<f64> = (0..grid.n_points())
        .map(|k| path.v()[k] - (curve.eval(grid.t(k)) - l0))
        .collect();
    SemimartingalePath::from_parts(
        grid,
        path.x0() - l0,
        path.m().to_vec(),
        v,
        path.qv().to_vec(),
        path.seed(),
    )
    .expect("shift preserves part consistency")
}

/// First grid index with `|X| >= n_bound`, or `n_steps` when the threshold
/// is never reached (truncation at the horizon).
pub fn first_exit(path: &SemimartingalePath, n_bound: f64) -> usize {
    path.x()
        .iter()
        .position(|x| x.abs() >= n_bound)
        .unwrap_or(path.grid().n_steps())
}
