//! Numerical integration against the model's heterogeneity law.
//!
//! The degree-heterogeneity shock is a centered Beta(mu0, mu1) variable whose
//! density has integrable singularities at both endpoints. Expectations are
//! computed by splitting [0, 1] at 1/2 and substituting `v = u^4` (left) and
//! `1 - v = u^4` (right), which removes both singularities, then applying
//! Gauss-Legendre on each smooth piece.

use statrs::function::beta::beta;

/// Stable logistic cdf.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nodes/weights for E[f(v)] with v ~ Beta(mu0, mu1), normalized so the
/// weights sum to one.
pub struct BetaRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BetaRule {
    pub fn new(mu0: f64, mu1: f64, points_per_piece: usize) -> Self {
        let (gl_x, gl_w) = gauss_legendre(points_per_piece);
        let b = beta(mu0, mu1);
        let mut nodes = Vec::with_capacity(2 * points_per_piece);
        let mut weights = Vec::with_capacity(2 * points_per_piece);
        // Left piece: v = u^4, u in [0, 2^{-1/4}]:
        //   integrand f(v) v^{mu0-1} (1-v)^{mu1-1} dv
        //   -> 4 f(u^4) u^{4 mu0 - 1} (1 - u^4)^{mu1 - 1} du
        let ul = 0.5f64.powf(0.25);
        for (x, w) in gl_x.iter().zip(&gl_w) {
            let u = 0.5 * ul * (x + 1.0);
            let v = u.powi(4);
            let jac = 4.0 * u.powf(4.0 * mu0 - 1.0) * (1.0 - v).powf(mu1 - 1.0);
            nodes.push(v);
            weights.push(0.5 * ul * w * jac / b);
        }
        // Right piece: 1 - v = u^4, same substitution from the other end.
        for (x, w) in gl_x.iter().zip(&gl_w) {
            let u = 0.5 * ul * (x + 1.0);
            let v = 1.0 - u.powi(4);
            let jac = 4.0 * u.powf(4.0 * mu1 - 1.0) * v.powf(mu0 - 1.0);
            nodes.push(v);
            weights.push(0.5 * ul * w * jac / b);
        }
        // Normalize: E[1] must be exactly 1.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        BetaRule { nodes, weights }
    }

    /// E[f(v)], v ~ Beta(mu0, mu1).
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * f(v))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // integral of x^6 over [-1,1] = 2/7
        let got: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(6)).sum();
        assert!((got - 2.0 / 7.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn beta_rule_reproduces_moments() {
        // Beta(1/4, 3/4): mean mu0/(mu0+mu1) = 1/4,
        // E[v^2] = mu0(mu0+1)/((s)(s+1)) with s = 1.
        let rule = BetaRule::new(0.25, 0.75, 64);
        let mean = rule.expect(|v| v);
        let m2 = rule.expect(|v| v * v);
        assert!((mean - 0.25).abs() < 1e-12, "mean = {mean}");
        let expect_m2 = 0.25 * 1.25 / (1.0 * 2.0);
        assert!((m2 - expect_m2).abs() < 1e-10, "m2 = {m2}");
    }

    #[test]
    fn logistic_matches_symmetry_and_known_value() {
        assert!((logistic(0.0) - 0.5).abs() < 1e-15);
        assert!((logistic(1.0) - 0.731_058_578_630_0049).abs() < 1e-12);
        for x in [-30.0, -3.0, 0.3, 8.0] {
            assert!((logistic(x) + logistic(-x) - 1.0).abs() < 1e-14);
        }
    }
}
