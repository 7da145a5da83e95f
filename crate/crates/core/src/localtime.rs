//! Local-time field estimation on a (time x level) grid.
//!
//! The estimator follows the occupation-density definition
//!
//! ```text
//! L_t(a) = lim_{eps -> 0} 1/(2 eps) int_0^t 1_{[a, a+eps)}(X(s)) d<M,M>_s
//! ```
//!
//! with `eps` tied to the level spacing of the grid. Under this convention
//! the local time is half the standard occupation density, so the
//! occupation-times identity carries a factor two:
//! `int g(s, X_s) d<M>_s = 2 int int g(s, a) dL_s(a) da`.
//!
//! Fields are cumulative sums of nonnegative terms, hence nonnegative and
//! nondecreasing in time at every level, with compact support inside the
//! level range. To keep memory bounded at fine time grids the field stores
//! snapshot rows at a subsampled set of instants (values at stored instants
//! are exact; lookups in between are cadlag in time).

use std::io::Write;

use crate::pathsim::{
    ito_integral_prefix, shift_by_curve, Curve, SemimartingalePath, RNG_ALGORITHM,
};

/// Uniformly spaced levels `a_j = a_min + j * delta_a` covering the path
/// range with at least one spare cell on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGrid {
    a_min: f64,
    delta_a: f64,
    n_levels: usize,
}

impl LevelGrid {
    pub fn new(a_min: f64, delta_a: f64, n_levels: usize) -> Self {
        assert!(delta_a > 0.0, "level spacing must be positive");
        assert!(n_levels >= 2, "need at least two levels");
        LevelGrid { a_min, delta_a, n_levels }
    }

    /// Grid aligned to integer multiples of `delta_a` covering
    /// `[lo - delta_a, hi + delta_a]`. Alignment keeps dyadic spacings
    /// exact, so common levels such as 0 land on a grid point.
    pub fn covering_range(lo: f64, hi: f64, delta_a: f64) -> Self {
        assert!(delta_a > 0.0 && lo.is_finite() && hi.is_finite());
        let a_min = delta_a * (lo / delta_a).floor() - delta_a;
        let n = (((hi + delta_a) - a_min) / delta_a).ceil() as usize + 1;
        LevelGrid { a_min, delta_a, n_levels: n.max(2) }
    }

    pub fn covering(path: &SemimartingalePath, delta_a: f64) -> Self {
        Self::covering_range(path.min_x(), path.max_x(), delta_a)
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn a_max(&self) -> f64 {
        self.level(self.n_levels - 1)
    }

    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn level(&self, j: usize) -> f64 {
        self.a_min + self.delta_a * j as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.n_levels).map(|j| self.level(j)).collect()
    }

    /// Index of the half-open bin `[a_j, a_j + delta_a)` containing `x`.
    pub fn bin(&self, x: f64) -> Option<usize> {
        let j = ((x - self.a_min) / self.delta_a).floor();
        if j < 0.0 || j >= self.n_levels as f64 {
            None
        } else {
            Some(j as usize)
        }
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.a_min <= lo - self.delta_a && self.a_max() >= hi + self.delta_a
    }
}

/// Marker for the stored normalization of the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimeConvention {
    /// Half the standard occupation density; the occupation-times identity
    /// then reads `int g d<M> = 2 int int g dL da`.
    HalfOccupationDensity,
}

#[derive(Debug, Clone, Copy)]
pub struct FieldOptions {
    /// Upper bound on stored snapshot rows (first and last instants are
    /// always stored).
    pub max_rows: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions { max_rows: 1025 }
    }
}

/// Estimated local-time field `L(t_i, a_j)` on stored instants x levels.
#[derive(Debug, Clone)]
pub struct LocalTimeField {
    times: Vec<f64>,
    grid: LevelGrid,
    /// Row-major, `data[i * n_levels + j]`.
    data: Vec<f64>,
    convention: LocalTimeConvention,
    /// Smoothing width of the estimator; equals the level spacing.
    epsilon: f64,
    seed: u64,
}

impl LocalTimeField {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn level_grid(&self) -> &LevelGrid {
        &self.grid
    }

    pub fn convention(&self) -> LocalTimeConvention {
        self.convention
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_levels();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn final_row(&self) -> &[f64] {
        self.row(self.times.len() - 1)
    }

    /// Time series of the level `a_j` at the stored instants.
    pub fn level_series(&self, j: usize) -> Vec<f64> {
        (0..self.times.len()).map(|i| self.row(i)[j]).collect()
    }

    /// Cadlag lookup: last stored row at or before `t`, bin of `a`.
    /// Levels outside the grid or times before the first row read 0.
    pub fn value_at(&self, t: f64, a: f64) -> f64 {
        let i = self.times.partition_point(|&p| p <= t);
        if i == 0 {
            return 0.0;
        }
        match self.grid.bin(a) {
            Some(j) => self.row(i - 1)[j],
            None => 0.0,
        }
    }

    /// Total mass `2 * sum_j L(row, a_j) * delta_a`; equals the realized
    /// quadratic variation at that instant when the grid covers the path.
    pub fn total_mass(&self, row: usize) -> f64 {
        2.0 * self.grid.delta_a() * self.row(row).iter().sum::<f64>()
    }

    /// CSV matrix: one row per stored instant, first column `t`, then one
    /// column per level.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.grid.n_levels()).map(|j| format!("a={}", self.grid.level(j))))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, &t) in self.times.iter().enumerate() {
            let mut line = String::new();
            line.push_str(&format!("{t}"));
            for v in self.row(i) {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// JSON header describing ranges, spacing, convention and provenance.
    pub fn header_json(&self) -> String {
        serde_json::json!({
            "a_min": self.grid.a_min(),
            "a_max": self.grid.a_max(),
            "delta_a": self.grid.delta_a(),
            "n_levels": self.grid.n_levels(),
            "n_rows": self.times.len(),
            "t_max": self.times.last(),
            "convention": "half-occupation-density",
            "epsilon": self.epsilon,
            "rng": RNG_ALGORITHM,
            "seed": self.seed,
        })
        .to_string()
    }
}

fn stored_indices(n_steps: usize, max_rows: usize) -> Vec<usize> {
    let max_rows = max_rows.max(2);
    let stride = (n_steps / (max_rows - 1)).max(1);
    let mut idx: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *idx.last().unwrap() != n_steps {
        idx.push(n_steps);
    }
    idx
}

/// Occupation-density estimator of the local-time field.
///
/// `L(t_k, a_j) = 1/(2 delta_a) * sum_{i < k} 1_{[a_j, a_j + delta_a)}(X(t_i)) dqv_i`.
///
/// The grid must cover the path range with margin; values never shrink in
/// time and vanish at levels the path has not reached.
pub fn local_time_occupation(
    path: &SemimartingalePath,
    grid: &LevelGrid,
    opts: &FieldOptions,
) -> LocalTimeField {
    assert!(
        grid.covers(path.min_x(), path.max_x()),
        "level grid [{}, {}] does not cover the path range [{}, {}] with margin",
        grid.a_min(),
        grid.a_max(),
        path.min_x(),
        path.max_x()
    );
    let n = path.grid().n_steps();
    let idx = stored_indices(n, opts.max_rows);
    let n_levels = grid.n_levels();
    let mut data = vec![0.0; idx.len() * n_levels];
    let mut running = vec![0.0; n_levels];
    let scale = 1.0 / (2.0 * grid.delta_a());
    let mut next_row = 0;
    let x = path.x();
    let qv = path.qv();
    for k in 0..=n {
        if next_row < idx.len() && idx[next_row] == k {
            data[next_row * n_levels..(next_row + 1) * n_levels].copy_from_slice(&running);
            next_row += 1;
        }
        if k < n {
            if let Some(j) = grid.bin(x[k]) {
                running[j] += scale * (qv[k + 1] - qv[k]);
            }
        }
    }
    LocalTimeField {
        times: idx.iter().map(|&k| path.grid().t(k)).collect(),
        grid: *grid,
        data,
        convention: LocalTimeConvention::HalfOccupationDensity,
        epsilon: grid.delta_a(),
        seed: path.seed(),
    }
}

/// Tanaka-style estimator of `t -> L_t(a)` along the full path grid:
/// `L_t(a) = (|X_t - a| - |X_0 - a| - int_0^t sgn-(X_s - a) dX_s) / 2`.
///
/// Used as an independent oracle for the occupation estimator; it is not
/// clamped, so Monte Carlo noise may take it slightly negative.
pub fn local_time_tanaka(path: &SemimartingalePath, a: f64) -> Vec<f64> {
    let sgn_left = |y: f64| if y <= 0.0 { -1.0 } else { 1.0 };
    let h: Vec<f64> = path.x().iter().map(|&x| sgn_left(x - a)).collect();
    let integral = ito_integral_prefix(&h, path).expect("h sampled on the path grid");
    let x0 = path.x()[0];
    path.x()
        .iter()
        .zip(integral)
        .map(|(&xt, int_t)| 0.5 * ((xt - a).abs() - (x0 - a).abs() - int_t))
        .collect()
}

/// Left-endpoint time-Stieltjes sum `sum phi(t_k) (L_{k+1} - L_k)`.
/// `phi` and `l_series` are aligned on the same instants.
pub fn dt_stieltjes(phi: &[f64], l_series: &[f64]) -> f64 {
    assert_eq!(phi.len(), l_series.len(), "phi and L must share instants");
    let mut acc = 0.0;
    for k in 0..l_series.len() - 1 {
        acc += phi[k] * (l_series[k + 1] - l_series[k]);
    }
    acc
}

/// Two-sided evaluation of the occupation-times identity for one path.
#[derive(Debug, Clone, Copy)]
pub struct OccupationCheck {
    /// `sum g(t_k, X_k) dqv_k`.
    pub lhs: f64,
    /// `2 sum_j delta_a * sum_k g(t_k, a_j) dL_k(a_j)`.
    pub rhs: f64,
    pub rel_error: f64,
}

/// Evaluates both sides of the occupation-times identity with the given
/// bounded measurable `g`.
pub fn occupation_check(
    g: &dyn Fn(f64, f64) -> f64,
    path: &SemimartingalePath,
    grid: &LevelGrid,
    opts: &FieldOptions,
) -> OccupationCheck {
    let mut lhs = 0.0;
    let x = path.x();
    let qv = path.qv();
    for k in 0..path.grid().n_steps() {
        let dqv = qv[k + 1] - qv[k];
        if dqv != 0.0 {
            lhs += g(path.grid().t(k), x[k]) * dqv;
        }
    }
    let field = local_time_occupation(path, grid, opts);
    let times = field.times();
    let mut rhs = 0.0;
    for j in 0..grid.n_levels() {
        let a = grid.level(j);
        let series = field.level_series(j);
        let phi: Vec<f64> = times.iter().map(|&t| g(t, a)).collect();
        rhs += dt_stieltjes(&phi, &series);
    }
    rhs *= 2.0 * grid.delta_a();
    let rel_error = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
    };
    OccupationCheck { lhs, rhs, rel_error }
}

/// Local time of the recentred path `X* = X - l` on the given grid.
pub fn curve_local_time(
    path: &SemimartingalePath,
    curve: &Curve,
    grid: &LevelGrid,
    opts: &FieldOptions,
) -> LocalTimeField {
    local_time_occupation(&shift_by_curve(path, curve), grid, opts)
}
