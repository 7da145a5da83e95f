//! Deterministic quadrature shared by the mollifier and the Krylov checker.
//!
//! Gauss-Legendre rules are built once per order by Newton iteration on the
//! Legendre recurrence; adaptive Simpson handles the one-off normalization
//! integrals where a tolerance matters more than node reuse.

/// A Gauss-Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the rule of the given order (number of nodes, at least 1).
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        // Odd orders have the middle node exactly at 0.
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Integrates `f` over `[a, b]` split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            acc += self.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f);
        }
        acc
    }
}

/// Legendre polynomial value and derivative at `x` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_exact_for_polynomials() {
        let rule = GaussRule::new(8);
        // order-8 Gauss integrates degree <= 15 exactly
        let got = rule.integrate(0.0, 2.0, |x| x.powi(11));
        assert_abs_diff_eq!(got, 2.0_f64.powi(12) / 12.0, epsilon = 1e-10);
    }

    #[test]
    fn gauss_panels_sine() {
        let rule = GaussRule::new(16);
        let got = rule.integrate_panels(0.0, std::f64::consts::PI, 4, f64::sin);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let got = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 3.0, 1e-12);
        assert_abs_diff_eq!(got, 1.0 - (-3.0_f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn odd_order_has_center_node() {
        let rule = GaussRule::new(5);
        assert_eq!(rule.order(), 5);
        let got = rule.integrate(-1.0, 1.0, |x| x * x);
        assert_abs_diff_eq!(got, 2.0 / 3.0, epsilon = 1e-14);
    }
}
