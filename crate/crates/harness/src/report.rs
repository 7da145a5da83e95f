//! Verdicted reports with reproducibility metadata.

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// One measured quantity. `pass` is set only when a tolerance applies;
/// informational metrics leave both empty.
#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_half: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: String,
    pub config: serde_json::Value,
    pub metrics: Vec<Metric>,
    /// True iff every metric with a tolerance passed. No metric is ever
    /// clamped to make this true.
    pub passed: bool,
    pub rng_algorithm: &'static str,
    pub seed: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl Report {
    pub fn new(kind: &str, config: serde_json::Value, seed: u64) -> Self {
        Report {
            kind: kind.to_string(),
            config,
            metrics: Vec::new(),
            passed: true,
            rng_algorithm: itocalc::pathsim::RNG_ALGORITHM,
            seed,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Informational metric without a verdict.
    pub fn info(&mut self, name: &str, value: f64) {
        self.metrics.push(Metric {
            name: name.to_string(),
            value,
            tolerance: None,
            pass: None,
            ci_half: None,
        });
    }

    /// Metric that must satisfy `value <= tolerance`.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64) -> bool {
        let pass = value <= tolerance && value.is_finite();
        self.metrics.push(Metric {
            name: name.to_string(),
            value,
            tolerance: Some(tolerance),
            pass: Some(pass),
            ci_half: None,
        });
        self.passed &= pass;
        pass
    }

    /// Metric that must satisfy `value >= tolerance`.
    pub fn check_ge(&mut self, name: &str, value: f64, tolerance: f64) -> bool {
        let pass = value >= tolerance && value.is_finite();
        self.metrics.push(Metric {
            name: name.to_string(),
            value,
            tolerance: Some(tolerance),
            pass: Some(pass),
            ci_half: None,
        });
        self.passed &= pass;
        pass
    }

    /// Boolean condition reported as a 0/1 metric.
    pub fn check_bool(&mut self, name: &str, ok: bool) -> bool {
        self.metrics.push(Metric {
            name: name.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: None,
            pass: Some(ok),
            ci_half: None,
        });
        self.passed &= ok;
        ok
    }

    pub fn with_ci(&mut self, ci_half: f64) {
        if let Some(m) = self.metrics.last_mut() {
            m.ci_half = Some(ci_half);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per metric, the format the CLI prints.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.metrics.len() + 1);
        for m in &self.metrics {
            let verdict = match m.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "info",
            };
            let tol = m
                .tolerance
                .map(|t| format!(" tol={t:.6}"))
                .unwrap_or_default();
            let ci = m
                .ci_half
                .map(|c| format!(" ci=+-{c:.3e}"))
                .unwrap_or_default();
            out.push(format!("{verdict:4}  {} = {:.6e}{tol}{ci}", m.name, m.value));
        }
        out.push(format!(
            "{}  {} ({} metrics, {:.2}s, rng={}, seed={})",
            if self.passed { "PASS" } else { "FAIL" },
            self.kind,
            self.metrics.len(),
            self.wall_time_s,
            self.rng_algorithm,
            self.seed
        ));
        out
    }
}

/// Percentile-bootstrap confidence interval for the mean. Residual
/// distributions are skewed, so this is preferred over a normal CI.
/// Deterministic given the seed.
pub fn bootstrap_ci_mean(samples: &[f64], resamples: usize, seed: u64) -> (f64, f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, mean, mean);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += samples[rng.random_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = means[(0.025 * resamples as f64) as usize];
    let hi = means[((0.975 * resamples as f64) as usize).min(resamples - 1)];
    (mean, lo, hi)
}
