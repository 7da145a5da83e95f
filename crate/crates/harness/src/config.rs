//! JSON experiment configuration.
//!
//! Every config is a flat JSON object selected by a `"kind"` tag:
//!
//! ```json
//! {
//!   "kind": "formula-check",
//!   "function": "tanaka",
//!   "variant": "semimartingale",
//!   "process": {"kind": "bm"},
//!   "n_steps": 16384,
//!   "n_paths": 256,
//!   "horizon": 1.0,
//!   "level_spacing": 0.0078125,
//!   "seed": 7,
//!   "tolerance": 0.05,
//!   "out_dir": "out",
//!   "format": "both"
//! }
//! ```
//!
//! Parse failures carry serde_json's line and column. Field defaults are
//! documented in the README together with the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::HarnessError;
use itocalc::pathsim::ItoProcessSpec;

fn d_steps() -> usize {
    1 << 14
}
fn d_paths() -> usize {
    256
}
fn d_horizon() -> f64 {
    1.0
}
fn d_spacing() -> f64 {
    1.0 / 128.0
}
fn d_true() -> bool {
    true
}
fn d_share() -> f64 {
    0.95
}
fn d_g() -> String {
    "x2".into()
}
fn d_family() -> Vec<String> {
    vec![
        "one".into(),
        "x2".into(),
        "sin-pi-x".into(),
        "indicator-positive".into(),
    ]
}
fn d_ns() -> Vec<u32> {
    vec![4, 8, 16, 32, 64]
}
fn d_points() -> Vec<(f64, f64)> {
    vec![(0.7, 0.2), (1.5, -0.4)]
}
fn d_steps_ladder() -> Vec<usize> {
    vec![1 << 10, 1 << 12, 1 << 14]
}
fn d_target() -> String {
    "sine".into()
}
fn d_n_bound() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Semimartingale,
    Curve,
    CurveJump,
    ItoProcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Coefficient of an Ito process, buildable from config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefConfig {
    Const { value: f64 },
    /// `base + amplitude * sin(x)`, bounded and uniformly elliptic when
    /// `base > |amplitude|`.
    SinBounded { base: f64, amplitude: f64 },
}

impl CoefConfig {
    pub fn build(&self) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
        let c = self.clone();
        move |_t: f64, x: f64| match c {
            CoefConfig::Const { value } => value,
            CoefConfig::SinBounded { base, amplitude } => base + amplitude * x.sin(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcessConfig {
    #[default]
    Bm,
    Ito {
        sigma: CoefConfig,
        b: CoefConfig,
        #[serde(default)]
        x0: f64,
        delta: f64,
        k_bound: f64,
        #[serde(default = "d_n_bound")]
        n_bound: f64,
    },
}

impl ProcessConfig {
    /// Standard unit-diffusion process (`sigma = 1, b = 0`).
    pub fn unit_ito(n_bound: f64) -> Self {
        ProcessConfig::Ito {
            sigma: CoefConfig::Const { value: 1.0 },
            b: CoefConfig::Const { value: 0.0 },
            x0: 0.0,
            delta: 1.0,
            k_bound: 1.0,
            n_bound,
        }
    }

    pub fn build_ito(&self) -> Result<(ItoProcessSpec, f64), HarnessError> {
        match self {
            ProcessConfig::Bm => Err(HarnessError::Config(
                "this experiment needs an Ito process, got kind=bm".into(),
            )),
            ProcessConfig::Ito { sigma, b, x0, delta, k_bound, n_bound } => {
                let spec = ItoProcessSpec::new(sigma.build(), b.build(), *x0, *delta, *k_bound)?;
                Ok((spec, *n_bound))
            }
        }
    }
}

/// Surface source for variation experiments: a named builtin or a
/// plain-text grid file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceConfig {
    Builtin(String),
    GridFile(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    FormulaCheck {
        function: String,
        #[serde(default)]
        variant: Option<VariantName>,
        #[serde(default)]
        process: ProcessConfig,
        #[serde(default = "d_steps")]
        n_steps: usize,
        #[serde(default = "d_paths")]
        n_paths: usize,
        #[serde(default = "d_horizon")]
        horizon: f64,
        #[serde(default = "d_spacing")]
        level_spacing: f64,
        #[serde(default)]
        seed: u64,
        tolerance: f64,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
    Occupation {
        #[serde(default = "d_g")]
        g: String,
        #[serde(default)]
        process: ProcessConfig,
        #[serde(default = "d_steps")]
        n_steps: usize,
        #[serde(default = "d_paths")]
        n_paths: usize,
        #[serde(default = "d_horizon")]
        horizon: f64,
        #[serde(default = "d_spacing")]
        level_spacing: f64,
        #[serde(default)]
        seed: u64,
        /// Pathwise relative-error tolerance.
        tolerance: f64,
        /// Fraction of paths that must be inside the tolerance.
        #[serde(default = "d_share")]
        pass_share: f64,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
    Krylov {
        #[serde(default = "d_family")]
        functions: Vec<String>,
        n_bound: f64,
        t: f64,
        #[serde(default)]
        process: Option<ProcessConfig>,
        #[serde(default = "d_steps")]
        n_steps: usize,
        #[serde(default = "d_paths")]
        n_paths: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
    Variation {
        surface: SurfaceConfig,
        /// `[s_lo, s_hi, x_lo, x_hi]`.
        rect: [f64; 4],
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
    MollifierReport {
        #[serde(default = "d_target")]
        target: String,
        #[serde(default = "d_ns")]
        ns: Vec<u32>,
        #[serde(default = "d_points")]
        points: Vec<(f64, f64)>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
    Convergence {
        function: String,
        #[serde(default)]
        variant: Option<VariantName>,
        #[serde(default)]
        process: ProcessConfig,
        #[serde(default = "d_steps_ladder")]
        steps: Vec<usize>,
        #[serde(default = "d_paths")]
        n_paths: usize,
        #[serde(default = "d_horizon")]
        horizon: f64,
        /// Level spacing at the reference size 2^14; scaled like sqrt(dt)
        /// across levels when coupling is on.
        #[serde(default = "d_spacing")]
        level_spacing: f64,
        #[serde(default = "d_true")]
        couple_level_spacing: bool,
        #[serde(default)]
        seed: u64,
        /// Optional bound on the finest-level mean normalized residual.
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        out_dir: Option<PathBuf>,
        #[serde(default)]
        format: OutputFormat,
    },
}

impl ExperimentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentConfig::FormulaCheck { .. } => "formula-check",
            ExperimentConfig::Occupation { .. } => "occupation",
            ExperimentConfig::Krylov { .. } => "krylov",
            ExperimentConfig::Variation { .. } => "variation",
            ExperimentConfig::MollifierReport { .. } => "mollifier-report",
            ExperimentConfig::Convergence { .. } => "convergence",
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        match self {
            ExperimentConfig::FormulaCheck { n_steps, n_paths, horizon, level_spacing, tolerance, .. } => {
                if *n_steps == 0 || *n_paths == 0 {
                    return bad("n_steps and n_paths must be positive".into());
                }
                if *horizon <= 0.0 || *level_spacing <= 0.0 || *tolerance <= 0.0
                    || !horizon.is_finite()
                {
                    return bad("horizon, level_spacing and tolerance must be positive".into());
                }
            }
            ExperimentConfig::Occupation { n_steps, n_paths, tolerance, pass_share, .. } => {
                if *n_steps == 0 || *n_paths == 0 {
                    return bad("n_steps and n_paths must be positive".into());
                }
                if *tolerance <= 0.0 || !(0.0..=1.0).contains(pass_share) {
                    return bad("tolerance must be positive and pass_share in [0,1]".into());
                }
            }
            ExperimentConfig::Krylov { n_bound, t, n_steps, n_paths, functions, .. } => {
                if *n_bound <= 0.0 || *t <= 0.0 {
                    return bad("n_bound and t must be positive".into());
                }
                if *n_steps == 0 || *n_paths == 0 || functions.is_empty() {
                    return bad("need steps, paths and at least one function".into());
                }
            }
            ExperimentConfig::Variation { rect, tolerance, .. } => {
                if rect[1] < rect[0] || rect[3] < rect[2] {
                    return bad(format!("rect must be ordered, got {rect:?}"));
                }
                if let Some(tol) = tolerance {
                    if *tol <= 0.0 {
                        return bad("tolerance must be positive".into());
                    }
                }
            }
            ExperimentConfig::MollifierReport { ns, points, .. } => {
                if ns.is_empty() || points.is_empty() {
                    return bad("need at least one smoothing index and one point".into());
                }
                if ns.contains(&0) {
                    return bad("smoothing indices start at 1".into());
                }
            }
            ExperimentConfig::Convergence { steps, n_paths, tolerance, .. } => {
                if steps.len() < 2 {
                    return bad("need at least two refinement levels".into());
                }
                if steps.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("steps must be strictly increasing".into());
                }
                if *n_paths == 0 {
                    return bad("n_paths must be positive".into());
                }
                if let Some(tol) = tolerance {
                    if *tol <= 0.0 {
                        return bad("tolerance must be positive".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::FormulaCheck { seed, .. }
            | ExperimentConfig::Occupation { seed, .. }
            | ExperimentConfig::Krylov { seed, .. }
            | ExperimentConfig::Variation { seed, .. }
            | ExperimentConfig::MollifierReport { seed, .. }
            | ExperimentConfig::Convergence { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            ExperimentConfig::FormulaCheck { seed, .. }
            | ExperimentConfig::Occupation { seed, .. }
            | ExperimentConfig::Krylov { seed, .. }
            | ExperimentConfig::Variation { seed, .. }
            | ExperimentConfig::MollifierReport { seed, .. }
            | ExperimentConfig::Convergence { seed, .. } => *seed = value,
        }
    }

    pub fn set_paths(&mut self, value: usize) {
        match self {
            ExperimentConfig::FormulaCheck { n_paths, .. }
            | ExperimentConfig::Occupation { n_paths, .. }
            | ExperimentConfig::Krylov { n_paths, .. }
            | ExperimentConfig::Convergence { n_paths, .. } => *n_paths = value,
            ExperimentConfig::Variation { .. } | ExperimentConfig::MollifierReport { .. } => {}
        }
    }

    pub fn set_steps(&mut self, value: usize) {
        match self {
            ExperimentConfig::FormulaCheck { n_steps, .. }
            | ExperimentConfig::Occupation { n_steps, .. }
            | ExperimentConfig::Krylov { n_steps, .. } => *n_steps = value,
            ExperimentConfig::Convergence { steps, .. } => {
                steps.clear();
                steps.push(value);
                // a single level still reports, just without a fitted rate
            }
            ExperimentConfig::Variation { .. } | ExperimentConfig::MollifierReport { .. } => {}
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        let dir = match self {
            ExperimentConfig::FormulaCheck { out_dir, .. }
            | ExperimentConfig::Occupation { out_dir, .. }
            | ExperimentConfig::Krylov { out_dir, .. }
            | ExperimentConfig::Variation { out_dir, .. }
            | ExperimentConfig::MollifierReport { out_dir, .. }
            | ExperimentConfig::Convergence { out_dir, .. } => out_dir,
        };
        dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn set_out_dir(&mut self, value: PathBuf) {
        match self {
            ExperimentConfig::FormulaCheck { out_dir, .. }
            | ExperimentConfig::Occupation { out_dir, .. }
            | ExperimentConfig::Krylov { out_dir, .. }
            | ExperimentConfig::Variation { out_dir, .. }
            | ExperimentConfig::MollifierReport { out_dir, .. }
            | ExperimentConfig::Convergence { out_dir, .. } => *out_dir = Some(value),
        }
    }

    pub fn format(&self) -> OutputFormat {
        match self {
            ExperimentConfig::FormulaCheck { format, .. }
            | ExperimentConfig::Occupation { format, .. }
            | ExperimentConfig::Krylov { format, .. }
            | ExperimentConfig::Variation { format, .. }
            | ExperimentConfig::MollifierReport { format, .. }
            | ExperimentConfig::Convergence { format, .. } => *format,
        }
    }

    pub fn set_format(&mut self, value: OutputFormat) {
        match self {
            ExperimentConfig::FormulaCheck { format, .. }
            | ExperimentConfig::Occupation { format, .. }
            | ExperimentConfig::Krylov { format, .. }
            | ExperimentConfig::Variation { format, .. }
            | ExperimentConfig::MollifierReport { format, .. }
            | ExperimentConfig::Convergence { format, .. } => *format = value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_formula_check() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "formula-check", "function": "tanaka", "tolerance": 0.05}"#,
        )
        .unwrap();
        assert_eq!(cfg.kind_name(), "formula-check");
        assert_eq!(cfg.seed(), 0);
        match cfg {
            ExperimentConfig::FormulaCheck { n_steps, n_paths, .. } => {
                assert_eq!(n_steps, 1 << 14);
                assert_eq!(n_paths, 256);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn parse_error_carries_position() {
        let err = ExperimentConfig::from_json("{\n  \"kind\": \"formula-check\",\n  oops\n}")
            .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 3"), "diagnostic missing position: {msg}");
    }

    #[test]
    fn rejects_bad_values() {
        let err = ExperimentConfig::from_json(
            r#"{"kind": "formula-check", "function": "tanaka", "tolerance": -1.0}"#,
        )
        .unwrap_err();
        assert!(format!("{err}").contains("tolerance"));
        assert!(ExperimentConfig::from_json(
            r#"{"kind": "convergence", "function": "tanaka", "steps": [1024]}"#
        )
        .is_err());
    }

    #[test]
    fn surface_config_shapes() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "variation", "surface": {"builtin": "product"}, "rect": [0,1,0,1]}"#,
        )
        .unwrap();
        assert_eq!(cfg.kind_name(), "variation");
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "variation", "surface": {"grid-file": "g.txt"}, "rect": [0,1,0,1]}"#,
        )
        .unwrap();
        assert_eq!(cfg.kind_name(), "variation");
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "krylov", "n_bound": 2.0, "t": 1.0, "seed": 5}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.seed(), 5);
        assert_eq!(back.kind_name(), "krylov");
    }
}
