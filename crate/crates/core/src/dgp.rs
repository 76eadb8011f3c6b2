//! Monte Carlo data-generating process: covariates, degree heterogeneity,
//! logistic dyad link formation, and simultaneous outcomes.
//!
//! Node-level draws are keyed by `(seed, rep, purpose, node)` and dyad shocks
//! by `(seed, rep, purpose, {i, j})`, so a replication is a pure function of
//! `(config, rep)` regardless of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{self, AdjacencyNetwork, CoefVector};
use crate::quad::{logistic, BetaRule};
use crate::rng::{dyad_stream, node_stream, Purpose};

/// Functional form of the latent outcome shifter `h(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HForm {
    /// `h(a) = sin(kappa a)`
    SinKappa,
    /// `h(a) = exp(kappa a)`
    ExpKappa,
    /// `h == 0` (exogenous-network benchmark)
    Zero,
}

/// Evaluates `h(a)` for the configured form.
pub fn eval_h(form: HForm, kappa: f64, a: f64) -> f64 {
    match form {
        HForm::SinKappa => (kappa * a).sin(),
        HForm::ExpKappa => (kappa * a).exp(),
        HForm::Zero => 0.0,
    }
}

/// Simulation design.
///
/// `surplus_offset` is a global intercept added to the link surplus; when
/// `target_mean_degree` is set the offset is instead calibrated by bisection
/// so that the expected mean degree hits the target (see
/// [`calibrate_offset`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub lambda: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub mu0: f64,
    pub mu1: f64,
    /// Heterogeneity scale; `None` uses the tightest scale with |a| <= 1.
    #[serde(default)]
    pub phi: Option<f64>,
    #[serde(default)]
    pub surplus_offset: f64,
    #[serde(default)]
    pub target_mean_degree: Option<f64>,
    pub beta: CoefVector,
    pub h_form: HForm,
    pub kappa: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// The paper's simulation design at a given size, endogenous effect, and
    /// target mean degree.
    pub fn paper_design(n: usize, beta1: f64, target_mean_degree: f64, seed: u64) -> Self {
        DgpConfig {
            n,
            lambda: 1.0,
            alpha_low: -1.5,
            alpha_high: 1.0,
            mu0: 0.25,
            mu1: 0.75,
            phi: None,
            surplus_offset: 0.0,
            target_mean_degree: Some(target_mean_degree),
            beta: CoefVector::new(beta1, vec![1.0], vec![1.0]),
            h_form: HForm::SinKappa,
            kappa: 3.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n = {} too small", self.n)));
        }
        if !(self.mu0 > 0.0 && self.mu1 > 0.0) {
            return Err(Error::InvalidConfig("mu0, mu1 must be positive".into()));
        }
        if self.alpha_low > self.alpha_high {
            return Err(Error::InvalidConfig("alpha_low > alpha_high".into()));
        }
        if let Some(phi) = self.phi {
            if !(phi > 0.0) {
                return Err(Error::InvalidConfig("phi must be positive".into()));
            }
        }
        self.beta.validate()?;
        if self.beta.beta2.len() != 1 {
            return Err(Error::InvalidConfig(
                "the simulated design has a single outcome regressor".into(),
            ));
        }
        Ok(())
    }

    /// Mean of the Beta shock, subtracted to center it.
    pub fn xi_mean(&self) -> f64 {
        self.mu0 / (self.mu0 + self.mu1)
    }

    /// Heterogeneity scale: configured value, or the tightest default with
    /// |a_i| <= 1, `1 / max(|alpha_low - xi_mean|, |alpha_high + mu1/(mu0+mu1)|)`.
    pub fn phi_value(&self) -> f64 {
        self.phi.unwrap_or_else(|| {
            let lo = (self.alpha_low - self.xi_mean()).abs();
            let hi = (self.alpha_high + self.mu1 / (self.mu0 + self.mu1)).abs();
            1.0 / lo.max(hi)
        })
    }

    /// Link-surplus offset, calibrating it first when a degree target is set.
    pub fn effective_offset(&self) -> Result<f64> {
        match self.target_mean_degree {
            Some(target) => calibrate_offset(self, target),
            None => Ok(self.surplus_offset),
        }
    }

    /// A copy with the offset resolved to a number, for hot loops.
    pub fn resolved(&self) -> Result<DgpConfig> {
        let mut out = self.clone();
        out.surplus_offset = self.effective_offset()?;
        out.target_mean_degree = None;
        Ok(out)
    }

    fn alpha_for(&self, x2: f64) -> f64 {
        if x2 > 0.0 {
            self.alpha_high
        } else {
            self.alpha_low
        }
    }

    /// `a = phi (alpha(x2) + xi)` for a realized centered shock.
    pub fn heterogeneity_from_shock(&self, x2: f64, xi: f64) -> f64 {
        self.phi_value() * (self.alpha_for(x2) + xi)
    }
}

/// One simulated data set. Latent vectors are present iff simulated.
#[derive(Debug, Clone)]
pub struct Sample {
    pub network: AdjacencyNetwork,
    pub x1: DMatrix<f64>,
    pub x2: DVector<f64>,
    pub y: DVector<f64>,
    pub a: Option<DVector<f64>>,
    pub upsilon: Option<DVector<f64>>,
}

impl Sample {
    pub fn n(&self) -> usize {
        self.network.n()
    }
}

/// Rademacher network covariate, P(+1) = 1/2.
pub fn draw_x2(cfg: &DgpConfig, rep: u64) -> DVector<f64> {
    DVector::from_fn(cfg.n, |i, _| {
        let mut rng = node_stream(cfg.seed, rep, Purpose::Covariate, i as u64);
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    })
}

/// Degree heterogeneity `a_i = phi (alpha(x2_i) + xi_i)` with a centered
/// Beta(mu0, mu1) shock.
pub fn draw_heterogeneity(cfg: &DgpConfig, x2: &DVector<f64>, rep: u64) -> DVector<f64> {
    let beta = Beta::new(cfg.mu0, cfg.mu1).expect("validated shape parameters");
    let xi_mean = cfg.xi_mean();
    DVector::from_fn(x2.len(), |i, _| {
        let mut rng = node_stream(cfg.seed, rep, Purpose::Heterogeneity, i as u64);
        let xi = beta.sample(&mut rng) - xi_mean;
        cfg.heterogeneity_from_shock(x2[i], xi)
    })
}

/// Outcome regressor `x1 = 3 q1 + cos(q2)/0.8 + eps`, `q1, q2 ~ N(x2, 1)`.
pub fn x1_from_draws(q1: f64, q2: f64, eps: f64) -> f64 {
    3.0 * q1 + q2.cos() / 0.8 + eps
}

pub fn draw_x1(cfg: &DgpConfig, x2: &DVector<f64>, rep: u64) -> DMatrix<f64> {
    DMatrix::from_fn(x2.len(), 1, |i, _| {
        let mut rng = node_stream(cfg.seed, rep, Purpose::OutcomeRegressor, i as u64);
        let q1 = x2[i] + rng.sample::<f64, _>(StandardNormal);
        let q2 = x2[i] + rng.sample::<f64, _>(StandardNormal);
        let eps = rng.sample::<f64, _>(StandardNormal);
        x1_from_draws(q1, q2, eps)
    })
}

/// Links form where `x2_i x2_j lambda + a_i + a_j + offset - u_ij >= 0` with a
/// per-dyad logistic shock shared by both directions.
pub fn form_links(
    cfg: &DgpConfig,
    x2: &DVector<f64>,
    a: &DVector<f64>,
    rep: u64,
) -> Result<AdjacencyNetwork> {
    let ids: Vec<u64> = (0..x2.len() as u64).collect();
    form_links_with_ids(cfg, x2, a, &ids, rep)
}

/// As [`form_links`], with explicit node ids keying the dyad shock streams.
/// Relabeling nodes and permuting `ids` identically permutes the network.
pub fn form_links_with_ids(
    cfg: &DgpConfig,
    x2: &DVector<f64>,
    a: &DVector<f64>,
    ids: &[u64],
    rep: u64,
) -> Result<AdjacencyNetwork> {
    let n = x2.len();
    if a.len() != n || ids.len() != n {
        return Err(Error::DimensionMismatch(
            "x2, a, ids must have equal length".into(),
        ));
    }
    let offset = cfg.effective_offset()?;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut rng = dyad_stream(cfg.seed, rep, Purpose::LinkShock, ids[i], ids[j]);
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let shock = (u / (1.0 - u)).ln();
            let surplus = x2[i] * x2[j] * cfg.lambda + a[i] + a[j] + offset;
            if surplus - shock >= 0.0 {
                d[(i, j)] = 1.0;
                d[(j, i)] = 1.0;
            }
        }
    }
    AdjacencyNetwork::from_dense(d)
}

/// Outcomes with explicit noise, for oracle tests: solves the simultaneous
/// system with shifter `h(a) + eps` and reports `upsilon = h(a) + eps`.
pub fn draw_outcomes_with_noise(
    cfg: &DgpConfig,
    net: &AdjacencyNetwork,
    x1: &DMatrix<f64>,
    a: &DVector<f64>,
    eps: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let upsilon = DVector::from_fn(a.len(), |i, _| {
        eval_h(cfg.h_form, cfg.kappa, a[i]) + eps[i]
    });
    let weights = network::row_normalize(net);
    let y = network::solve_outcomes(&weights, &cfg.beta, x1, &upsilon)?;
    Ok((y, upsilon))
}

/// Outcomes under the configured design; `eps ~ N(0, 1)` per node.
pub fn draw_outcomes(
    cfg: &DgpConfig,
    net: &AdjacencyNetwork,
    x1: &DMatrix<f64>,
    a: &DVector<f64>,
    rep: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let eps = DVector::from_fn(a.len(), |i, _| {
        let mut rng = node_stream(cfg.seed, rep, Purpose::OutcomeNoise, i as u64);
        rng.sample::<f64, _>(StandardNormal)
    });
    draw_outcomes_with_noise(cfg, net, x1, a, &eps)
}

/// Runs the full design for one replication.
pub fn simulate(cfg: &DgpConfig, rep: u64) -> Result<Sample> {
    cfg.validate()?;
    let cfg = cfg.resolved()?;
    let x2 = draw_x2(&cfg, rep);
    let a = draw_heterogeneity(&cfg, &x2, rep);
    let x1 = draw_x1(&cfg, &x2, rep);
    let network = form_links(&cfg, &x2, &a, rep)?;
    let (y, upsilon) = draw_outcomes(&cfg, &network, &x1, &a, rep)?;
    Ok(Sample {
        network,
        x1,
        x2,
        y,
        a: Some(a),
        upsilon: Some(upsilon),
    })
}

const BETA_RULE_POINTS: usize = 64;

/// Dyad link probability `E[Lambda(x2 x2' lambda + a + a' + offset)]` under
/// the design law, by quadrature over the two independent (x2, xi) pairs.
pub fn expected_link_prob(cfg: &DgpConfig, offset: f64) -> f64 {
    let rule = BetaRule::new(cfg.mu0, cfg.mu1, BETA_RULE_POINTS);
    let xi_mean = cfg.xi_mean();
    let mut total = 0.0;
    for s_i in [-1.0, 1.0] {
        for s_j in [-1.0, 1.0] {
            let t = s_i * s_j * cfg.lambda;
            let mut cell = 0.0;
            for (vi, wi) in rule.nodes.iter().zip(&rule.weights) {
                let a_i = cfg.heterogeneity_from_shock(s_i, vi - xi_mean);
                for (vj, wj) in rule.nodes.iter().zip(&rule.weights) {
                    let a_j = cfg.heterogeneity_from_shock(s_j, vj - xi_mean);
                    cell += wi * wj * logistic(t + a_i + a_j + offset);
                }
            }
            total += 0.25 * cell;
        }
    }
    total
}

/// Large-N limit of the scaled degree of a node with attributes `(x2, a)`:
/// the dyad link probability against an independent partner drawn from the
/// design law.
pub fn limit_scaled_degree(cfg: &DgpConfig, x2: f64, a: f64) -> Result<f64> {
    let offset = cfg.effective_offset()?;
    let rule = BetaRule::new(cfg.mu0, cfg.mu1, BETA_RULE_POINTS);
    let xi_mean = cfg.xi_mean();
    let mut total = 0.0;
    for s in [-1.0, 1.0] {
        total += 0.5
            * rule.expect(|v| {
                let a_j = cfg.heterogeneity_from_shock(s, v - xi_mean);
                logistic(x2 * s * cfg.lambda + a + a_j + offset)
            });
    }
    Ok(total)
}

/// Bisection for the surplus offset at which the expected mean degree
/// `(n - 1) E[link prob]` equals `target`.
pub fn calibrate_offset(cfg: &DgpConfig, target_mean_degree: f64) -> Result<f64> {
    let n1 = cfg.n as f64 - 1.0;
    if !(target_mean_degree > 0.0 && target_mean_degree < n1) {
        return Err(Error::InvalidConfig(format!(
            "target mean degree {target_mean_degree} outside (0, {n1})"
        )));
    }
    let f = |c: f64| n1 * expected_link_prob(cfg, c) - target_mean_degree;
    let (mut lo, mut hi) = (-60.0, 60.0);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::InvalidConfig(
            "degree target not bracketed by offsets in [-60, 60]".into(),
        ));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::scaled_degrees;

    fn base_cfg(n: usize) -> DgpConfig {
        DgpConfig::paper_design(n, 0.2, 1.9, 42)
    }

    #[test]
    fn phi_default_binds_a_to_unit_interval() {
        let cfg = base_cfg(50);
        // alpha_low - xi_mean = -1.75, alpha_high + mu1/(mu0+mu1) = 1.75
        assert!((cfg.phi_value() - 1.0 / 1.75).abs() < 1e-15);
    }

    #[test]
    fn heterogeneity_plug_in_values() {
        let mut cfg = base_cfg(50);
        cfg.phi = Some(0.5);
        assert!((cfg.heterogeneity_from_shock(1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((cfg.heterogeneity_from_shock(-1.0, 0.0) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn heterogeneity_respects_support_bounds() {
        let cfg = base_cfg(200);
        let x2 = draw_x2(&cfg, 0);
        let a = draw_heterogeneity(&cfg, &x2, 0);
        let phi = cfg.phi_value();
        let lo = phi * (cfg.alpha_low - cfg.xi_mean());
        let hi = phi * (cfg.alpha_high + cfg.mu1 / (cfg.mu0 + cfg.mu1));
        for &v in a.iter() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn centered_beta_shock_has_zero_mean() {
        // Sample mean of xi over 10^6 draws within 3 sd / 1000 of zero.
        let cfg = base_cfg(2);
        let beta = Beta::new(cfg.mu0, cfg.mu1).unwrap();
        let mut sum = 0.0;
        let n = 1_000_000u64;
        for i in 0..n {
            let mut rng = node_stream(cfg.seed, 9, Purpose::Heterogeneity, i);
            sum += beta.sample(&mut rng) - cfg.xi_mean();
        }
        let sd = (cfg.mu0 * cfg.mu1
            / ((cfg.mu0 + cfg.mu1).powi(2) * (cfg.mu0 + cfg.mu1 + 1.0)))
        .sqrt();
        assert!((sum / n as f64).abs() < 3.0 * sd / 1000.0);
    }

    #[test]
    fn x1_plug_in_value() {
        assert!((x1_from_draws(0.0, 0.0, 0.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn x1_conditional_moments_match_quadrature() {
        // E[x1 | x2] = 3 x2 + E[cos(N(x2, 1))]/0.8, the cosine expectation by
        // Gauss-Hermite quadrature; Var(x1 | x2) >= 9 from the 3 q1 term.
        let mut cfg = base_cfg(2);
        cfg.seed = 7;
        let reps = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let x2 = 1.0;
        for i in 0..reps {
            let mut rng = node_stream(cfg.seed, 1, Purpose::OutcomeRegressor, i as u64);
            let q1 = x2 + rng.sample::<f64, _>(StandardNormal);
            let q2 = x2 + rng.sample::<f64, _>(StandardNormal);
            let eps = rng.sample::<f64, _>(StandardNormal);
            let v = x1_from_draws(q1, q2, eps);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / reps as f64;
        let var = sum2 / reps as f64 - mean * mean;

        // E[cos(q2)] with q2 ~ N(1, 1) via 40-node Gauss-Hermite:
        //   integral cos(1 + sqrt(2) t) e^{-t^2} dt / sqrt(pi)
        let cos_mean = gauss_hermite_cos_mean(1.0, 40);
        let expect = 3.0 * x2 + cos_mean / 0.8;
        assert!(
            (mean - expect).abs() < 0.01,
            "mean {mean} vs quadrature {expect}"
        );
        assert!(var >= 9.0, "var {var}");
    }

    /// E[cos(X)], X ~ N(mu, 1), by Gauss-Hermite with nodes from the Golub-
    /// Welsch-free Newton construction on Hermite polynomials.
    fn gauss_hermite_cos_mean(mu: f64, n: usize) -> f64 {
        // Nodes/weights for weight e^{-t^2} by Newton on physicists' Hermite.
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        let mut x = 0.0f64;
        for i in 0..m {
            x = if i == 0 {
                ((2 * n + 1) as f64).sqrt() - 1.85575 * ((2 * n + 1) as f64).powf(-1.0 / 6.0)
            } else if i == 1 {
                x - 1.14 * (n as f64).powf(0.426) / x
            } else if i == 2 {
                1.86 * x - 0.86 * nodes[0]
            } else if i == 3 {
                1.91 * x - 0.91 * nodes[1]
            } else {
                2.0 * x - nodes[i - 2]
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = std::f64::consts::PI.powf(-0.25);
                let mut p2 = 0.0;
                for k in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = x * (2.0 / (k as f64 + 1.0)).sqrt() * p2
                        - (k as f64 / (k as f64 + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-14 {
                    break;
                }
            }
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        let total: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| w * (mu + std::f64::consts::SQRT_2 * t).cos())
            .sum();
        total / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn form_links_saturates_with_offset() {
        let mut cfg = base_cfg(12);
        cfg.target_mean_degree = None;
        cfg.surplus_offset = 1e6;
        let x2 = draw_x2(&cfg, 0);
        let a = draw_heterogeneity(&cfg, &x2, 0);
        let net = form_links(&cfg, &x2, &a, 0).unwrap();
        assert!(net.degrees().iter().all(|&d| d == 11));
        cfg.surplus_offset = -1e6;
        let net = form_links(&cfg, &x2, &a, 0).unwrap();
        assert!(net.degrees().iter().all(|&d| d == 0));
    }

    #[test]
    fn link_frequency_matches_logistic_cdf() {
        // x2_i = x2_j = 1, a = 0, lambda = 1, offset 0: P(link) = logistic(1).
        let mut cfg = base_cfg(500);
        cfg.n = 500;
        cfg.target_mean_degree = None;
        cfg.surplus_offset = 0.0;
        let x2 = DVector::from_element(500, 1.0);
        let a = DVector::zeros(500);
        let net = form_links(&cfg, &x2, &a, 3).unwrap();
        let dyads = 500.0 * 499.0 / 2.0;
        let links: f64 = net.degrees().iter().map(|&d| d as f64).sum::<f64>() / 2.0;
        let freq = links / dyads;
        assert!(
            (freq - logistic(1.0)).abs() < 0.005,
            "freq {freq} vs {}",
            logistic(1.0)
        );
    }

    #[test]
    fn outcomes_reduce_to_direct_regression() {
        let mut cfg = base_cfg(8);
        cfg.beta = CoefVector::new(0.0, vec![2.0], vec![0.0]);
        cfg.h_form = HForm::Zero;
        cfg.target_mean_degree = None;
        let x2 = draw_x2(&cfg, 0);
        let a = draw_heterogeneity(&cfg, &x2, 0);
        let x1 = draw_x1(&cfg, &x2, 0);
        let net = form_links(&cfg, &x2, &a, 0).unwrap();
        let eps = DVector::zeros(8);
        let (y, upsilon) = draw_outcomes_with_noise(&cfg, &net, &x1, &a, &eps).unwrap();
        assert!(upsilon.amax() == 0.0);
        for i in 0..8 {
            assert!((y[i] - 2.0 * x1[(i, 0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_inputs_give_zero_outcomes() {
        let mut cfg = base_cfg(6);
        cfg.h_form = HForm::Zero;
        cfg.target_mean_degree = None;
        let net = AdjacencyNetwork::from_edges(6, &[(0, 1), (2, 3)]).unwrap();
        let x1 = DMatrix::zeros(6, 1);
        let a = DVector::zeros(6);
        let eps = DVector::zeros(6);
        let (y, _) = draw_outcomes_with_noise(&cfg, &net, &x1, &a, &eps).unwrap();
        assert_eq!(y.amax(), 0.0);
    }

    #[test]
    fn sin_form_vanishes_at_zero() {
        assert_eq!(eval_h(HForm::SinKappa, 3.0, 0.0), 0.0);
        assert!((eval_h(HForm::ExpKappa, 3.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn calibration_hits_target_degree() {
        let cfg = base_cfg(100);
        let off = calibrate_offset(&cfg, 1.9).unwrap();
        let implied = 99.0 * expected_link_prob(&cfg, off);
        assert!((implied - 1.9).abs() < 1e-9, "implied {implied}");
    }

    #[test]
    fn simulated_mean_degree_tracks_calibration() {
        let cfg = DgpConfig::paper_design(100, 0.2, 1.9, 11);
        let mut mean = 0.0;
        let reps = 40;
        for rep in 0..reps {
            let s = simulate(&cfg, rep).unwrap();
            let sd = scaled_degrees(&s.network).unwrap();
            mean += sd.iter().sum::<f64>() / sd.len() as f64 / reps as f64;
        }
        let target = 1.9 / 99.0;
        assert!(
            (mean - target).abs() < 0.1 * target,
            "mean {mean} target {target}"
        );
    }

    #[test]
    fn exchangeability_under_relabeling() {
        let cfg = base_cfg(20).resolved().unwrap();
        let x2 = draw_x2(&cfg, 5);
        let a = draw_heterogeneity(&cfg, &x2, 5);
        let ids: Vec<u64> = (0..20).collect();
        let net = form_links_with_ids(&cfg, &x2, &a, &ids, 5).unwrap();

        // Reverse permutation.
        let perm: Vec<usize> = (0..20).rev().collect();
        let x2p = DVector::from_fn(20, |i, _| x2[perm[i]]);
        let ap = DVector::from_fn(20, |i, _| a[perm[i]]);
        let idsp: Vec<u64> = perm.iter().map(|&k| k as u64).collect();
        let netp = form_links_with_ids(&cfg, &x2p, &ap, &idsp, 5).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(
                    netp.dense()[(i, j)],
                    net.dense()[(perm[i], perm[j])],
                    "permutation equivariance at ({i},{j})"
                );
            }
        }
    }
}
