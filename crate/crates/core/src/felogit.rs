//! Joint maximum likelihood for the dyadic logit link model with per-node
//! fixed effects: homophily coefficients plus one degree-heterogeneity
//! parameter per node.
//!
//! The optimizer alternates Jacobi sweeps that re-solve each node's scalar
//! score equation (safeguarded Newton with a bisection bracket; the per-node
//! score is strictly decreasing in its own parameter) with Newton steps for
//! the homophily block, until the sup-norm of the full score is below
//! tolerance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::AdjacencyNetwork;
use crate::quad::logistic;

/// Built-in dyad feature maps `t(x2_i, x2_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DyadFeatureKind {
    Product,
    AbsDiff,
}

/// Symmetric dyad-specific feature vectors, one coordinate per matrix.
#[derive(Debug, Clone)]
pub struct DyadFeatures {
    n: usize,
    coords: Vec<DMatrix<f64>>,
}

impl DyadFeatures {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn value(&self, coord: usize, i: usize, j: usize) -> f64 {
        self.coords[coord][(i, j)]
    }

    /// `t_ij' lambda` for one dyad.
    pub fn linear_index(&self, lambda: &[f64], i: usize, j: usize) -> f64 {
        self.coords
            .iter()
            .zip(lambda)
            .map(|(c, &l)| c[(i, j)] * l)
            .sum()
    }

    /// Builds features from an arbitrary symmetric map.
    pub fn from_fn(n: usize, dim: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut coords = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = f(c, i, j);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            coords.push(m);
        }
        Ok(DyadFeatures { n, coords })
    }
}

/// Features from node covariates: one coordinate per column of `x2`.
pub fn dyad_features(x2: &DMatrix<f64>, kind: DyadFeatureKind) -> Result<DyadFeatures> {
    let n = x2.nrows();
    let p = x2.ncols();
    DyadFeatures::from_fn(n, p, |c, i, j| match kind {
        DyadFeatureKind::Product => x2[(i, c)] * x2[(j, c)],
        DyadFeatureKind::AbsDiff => (x2[(i, c)] - x2[(j, c)]).abs(),
    })
}

/// Result of the joint MLE.
#[derive(Debug, Clone)]
pub struct LinkModelFit {
    pub lambda_hat: Vec<f64>,
    /// Indexed by original node id; `NaN` for excluded nodes.
    pub a_hat: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_grad: f64,
    /// Nodes excluded because their fixed effect has no finite MLE
    /// (boundary degree within the fitted subnetwork).
    pub excluded: Vec<usize>,
}

impl LinkModelFit {
    pub fn retained(&self) -> Vec<usize> {
        (0..self.a_hat.len())
            .filter(|&i| self.a_hat[i].is_finite())
            .collect()
    }

    pub fn covers(&self, node: usize) -> bool {
        node < self.a_hat.len() && self.a_hat[node].is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Sup-norm tolerance on the full score.
    pub tol: f64,
    /// Cap on alternation sweeps.
    pub max_sweeps: usize,
    /// Exclude boundary-degree nodes (iteratively) instead of erroring.
    pub exclude_boundary: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_sweeps: 500,
            exclude_boundary: false,
        }
    }
}

/// A feature coordinate constant across dyads is absorbed by the fixed
/// effects; the corresponding homophily coefficient would not be identified.
fn check_feature_variation(feats: &DyadFeatures, nodes: &[usize]) -> Result<()> {
    for c in 0..feats.dim() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (pi, &i) in nodes.iter().enumerate() {
            for &j in &nodes[pi + 1..] {
                let v = feats.value(c, i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi - lo < 1e-12 {
            return Err(Error::CollinearFeatures { coord: c });
        }
    }
    Ok(())
}

/// Degrees restricted to a retained subset.
fn sub_degrees(net: &AdjacencyNetwork, retained: &[usize]) -> Vec<usize> {
    retained
        .iter()
        .map(|&i| {
            retained
                .iter()
                .filter(|&&j| j != i && net.has_link(i, j))
                .count()
        })
        .collect()
}

/// Iteratively removes boundary-degree nodes until the remaining subnetwork
/// has every degree in [1, m - 2].
fn stable_interior(net: &AdjacencyNetwork) -> (Vec<usize>, Vec<usize>) {
    let mut retained: Vec<usize> = (0..net.n()).collect();
    let mut excluded = Vec::new();
    loop {
        if retained.len() < 3 {
            excluded.extend(retained.drain(..));
            break;
        }
        let degs = sub_degrees(net, &retained);
        let m = retained.len();
        let (keep, drop): (Vec<_>, Vec<_>) = retained
            .iter()
            .zip(&degs)
            .partition(|&(_, &d)| d >= 1 && d <= m - 2);
        if drop.is_empty() {
            break;
        }
        excluded.extend(drop.into_iter().map(|(&i, _)| i));
        retained = keep.into_iter().map(|(&i, _)| i).collect();
    }
    excluded.sort_unstable();
    (retained, excluded)
}

/// Log-likelihood of the dyadic logit over dyads within `retained`.
pub fn log_likelihood(
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    lambda: &[f64],
    a: &[f64],
    retained: &[usize],
) -> f64 {
    let mut ll = 0.0;
    for (pi, &i) in retained.iter().enumerate() {
        for &j in &retained[pi + 1..] {
            let s = feats.linear_index(lambda, i, j) + a[i] + a[j];
            let d = if net.has_link(i, j) { 1.0 } else { 0.0 };
            // log(1 + e^s) without overflow
            let log1p = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
            ll += d * s - log1p;
        }
    }
    ll
}

/// Root of one node's score equation given everything else fixed.
///
/// `partner_index[j]` holds `t_ij' lambda + a_j` for each retained partner j;
/// the score `deg_i - sum_j logistic(partner_index[j] + x)` is strictly
/// decreasing in `x`, so a bisection bracket plus Newton is globally
/// convergent.
fn solve_node_root(deg_i: f64, partner_index: &[f64], start: f64) -> f64 {
    let score = |x: f64| -> (f64, f64) {
        let mut s = deg_i;
        let mut info = 0.0;
        for &b in partner_index {
            let p = logistic(b + x);
            s -= p;
            info += p * (1.0 - p);
        }
        (s, info)
    };
    // Expand a bracket [lo, hi] with score(lo) > 0 > score(hi).
    let mut x = start;
    let (mut s, mut info) = score(x);
    if s == 0.0 {
        return x;
    }
    let mut step = 1.0;
    let (mut lo, mut hi) = if s > 0.0 {
        let lo = x;
        let mut hi = x + step;
        while score(hi).0 > 0.0 {
            step *= 2.0;
            hi += step;
            if step > 1e6 {
                return hi; // effectively unbounded; caller screens boundary degrees
            }
        }
        (lo, hi)
    } else {
        let hi = x;
        let mut lo = x - step;
        while score(lo).0 < 0.0 {
            step *= 2.0;
            lo -= step;
            if step > 1e6 {
                return lo;
            }
        }
        (lo, hi)
    };
    // Safeguarded Newton.
    for _ in 0..200 {
        let newton = if info > 1e-300 { x + s / info } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let r = score(x);
        s = r.0;
        info = r.1;
        if s > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if s.abs() <= 1e-12 * deg_i.max(1.0) || (hi - lo) <= 1e-12 {
            break;
        }
    }
    x
}

/// One Jacobi sweep: every fixed effect re-solved against the current vector.
///
/// Errors if any node in scope has boundary degree (its root diverges).
pub fn profile_update_a(
    lambda: &[f64],
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    a_current: &[f64],
) -> Result<Vec<f64>> {
    let retained: Vec<usize> = (0..net.n()).collect();
    let degs = sub_degrees(net, &retained);
    let boundary: Vec<usize> = retained
        .iter()
        .zip(&degs)
        .filter(|&(_, &d)| d == 0 || d == net.n() - 1)
        .map(|(&i, _)| i)
        .collect();
    if !boundary.is_empty() {
        return Err(Error::MleNonexistent {
            count: boundary.len(),
            first: boundary.into_iter().take(8).collect(),
        });
    }
    Ok(profile_update_subset(
        lambda, net, feats, a_current, &retained, &degs,
    ))
}

fn profile_update_subset(
    lambda: &[f64],
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    a_current: &[f64],
    retained: &[usize],
    degs: &[usize],
) -> Vec<f64> {
    let mut out = a_current.to_vec();
    let updates: Vec<(usize, f64)> = retained
        .par_iter()
        .zip(degs.par_iter())
        .map(|(&i, &deg)| {
            let partner: Vec<f64> = retained
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| feats.linear_index(lambda, i, j) + a_current[j])
                .collect();
            (i, solve_node_root(deg as f64, &partner, a_current[i]))
        })
        .collect();
    for (i, v) in updates {
        out[i] = v;
    }
    out
}

/// Score of the full likelihood: homophily block and fixed-effect block.
fn full_score(
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    lambda: &[f64],
    a: &[f64],
    retained: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let dim = feats.dim();
    let mut g_lambda = vec![0.0; dim];
    let mut g_a = vec![0.0; retained.len()];
    for (pi, &i) in retained.iter().enumerate() {
        for (pj, &j) in retained.iter().enumerate().skip(pi + 1) {
            let p = logistic(feats.linear_index(lambda, i, j) + a[i] + a[j]);
            let d = if net.has_link(i, j) { 1.0 } else { 0.0 };
            let resid = d - p;
            for c in 0..dim {
                g_lambda[c] += feats.value(c, i, j) * resid;
            }
            g_a[pi] += resid;
            g_a[pj] += resid;
        }
    }
    (g_lambda, g_a)
}

/// Newton step for the homophily block holding fixed effects, with step
/// halving so the likelihood never decreases.
fn lambda_step(
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    lambda: &mut Vec<f64>,
    a: &[f64],
    retained: &[usize],
) {
    let dim = feats.dim();
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    for (pi, &i) in retained.iter().enumerate() {
        for &j in &retained[pi + 1..] {
            let p = logistic(feats.linear_index(lambda, i, j) + a[i] + a[j]);
            let d = if net.has_link(i, j) { 1.0 } else { 0.0 };
            let w = p * (1.0 - p);
            for c in 0..dim {
                let tc = feats.value(c, i, j);
                grad[c] += tc * (d - p);
                for c2 in 0..dim {
                    hess[(c, c2)] += tc * feats.value(c2, i, j) * w;
                }
            }
        }
    }
    let Some(delta) = hess.lu().solve(&grad) else {
        return;
    };
    let base_ll = log_likelihood(net, feats, lambda, a, retained);
    let mut scale = 1.0;
    for _ in 0..30 {
        let cand: Vec<f64> = lambda
            .iter()
            .zip(delta.iter())
            .map(|(&l, &d)| l + scale * d)
            .collect();
        if log_likelihood(net, feats, &cand, a, retained) >= base_ll {
            *lambda = cand;
            return;
        }
        scale *= 0.5;
    }
}

/// Joint MLE of `(lambda, a_1..a_N)`.
///
/// With `opts.exclude_boundary` the fit drops boundary-degree nodes
/// (iterating, since removals create new boundaries) and reports them in
/// [`LinkModelFit::excluded`]; otherwise their presence is an error.
pub fn fit_joint_mle(
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    opts: &FitOptions,
) -> Result<LinkModelFit> {
    let n = net.n();
    if feats.n() != n {
        return Err(Error::DimensionMismatch(
            "feature container size does not match network".into(),
        ));
    }
    check_feature_variation(feats, &(0..n).collect::<Vec<_>>())?;

    let (retained, excluded) = if opts.exclude_boundary {
        stable_interior(net)
    } else {
        let all: Vec<usize> = (0..n).collect();
        let degs = sub_degrees(net, &all);
        let boundary: Vec<usize> = all
            .iter()
            .zip(&degs)
            .filter(|&(_, &d)| d == 0 || d == n - 1)
            .map(|(&i, _)| i)
            .collect();
        if !boundary.is_empty() {
            return Err(Error::MleNonexistent {
                count: boundary.len(),
                first: boundary.into_iter().take(8).collect(),
            });
        }
        (all, Vec::new())
    };
    if retained.len() < 3 {
        return Err(Error::MleNonexistent {
            count: n,
            first: excluded.into_iter().take(8).collect(),
        });
    }
    check_feature_variation(feats, &retained)?;

    let degs = sub_degrees(net, &retained);
    let m = retained.len();
    let mut lambda = vec![0.0; feats.dim()];
    let mut a = vec![f64::NAN; n];
    for (&i, &d) in retained.iter().zip(&degs) {
        let sd = (d as f64 / (m as f64 - 1.0)).clamp(0.5 / (m as f64 - 1.0), 1.0 - 0.5 / (m as f64 - 1.0));
        a[i] = 0.5 * (sd / (1.0 - sd)).ln();
    }

    let mut max_grad = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        a = profile_update_subset(&lambda, net, feats, &a, &retained, &degs);
        lambda_step(net, feats, &mut lambda, &a, &retained);
        let (g_l, g_a) = full_score(net, feats, &lambda, &a, &retained);
        max_grad = g_l
            .iter()
            .chain(g_a.iter())
            .fold(0.0f64, |acc, &g| acc.max(g.abs()));
        if max_grad <= opts.tol {
            return Ok(LinkModelFit {
                lambda_hat: lambda,
                a_hat: a,
                converged: true,
                iterations: sweep,
                max_grad,
                excluded,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_sweeps,
        max_grad,
    })
}

/// Observed information (negative Hessian) of the full likelihood at
/// `(lambda, a)`, ordered as (lambda block, then retained fixed effects).
/// Positive definiteness certifies local joint identification.
pub fn observed_information(
    net: &AdjacencyNetwork,
    feats: &DyadFeatures,
    lambda: &[f64],
    a: &[f64],
    retained: &[usize],
) -> DMatrix<f64> {
    let dim = feats.dim();
    let m = retained.len();
    let mut h = DMatrix::zeros(dim + m, dim + m);
    for (pi, &i) in retained.iter().enumerate() {
        for (pj, &j) in retained.iter().enumerate().skip(pi + 1) {
            let p = logistic(feats.linear_index(lambda, i, j) + a[i] + a[j]);
            let w = p * (1.0 - p);
            for c in 0..dim {
                let tc = feats.value(c, i, j);
                for c2 in 0..dim {
                    h[(c, c2)] += tc * feats.value(c2, i, j) * w;
                }
                h[(c, dim + pi)] += tc * w;
                h[(dim + pi, c)] += tc * w;
                h[(c, dim + pj)] += tc * w;
                h[(dim + pj, c)] += tc * w;
            }
            h[(dim + pi, dim + pi)] += w;
            h[(dim + pj, dim + pj)] += w;
            h[(dim + pi, dim + pj)] += w;
            h[(dim + pj, dim + pi)] += w;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{self, DgpConfig};

    #[test]
    fn product_and_absdiff_features() {
        let x2 = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let f = dyad_features(&x2, DyadFeatureKind::Product).unwrap();
        assert_eq!(f.value(0, 0, 1), -1.0);
        let x2 = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let f = dyad_features(&x2, DyadFeatureKind::Product).unwrap();
        assert_eq!(f.value(0, 0, 1), 1.0);
        let x2 = DMatrix::from_column_slice(2, 1, &[0.3, 0.8]);
        let f = dyad_features(&x2, DyadFeatureKind::AbsDiff).unwrap();
        assert!((f.value(0, 0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn features_are_symmetric() {
        let x2 = DMatrix::from_column_slice(4, 1, &[0.3, -1.2, 0.8, 2.0]);
        let f = dyad_features(&x2, DyadFeatureKind::AbsDiff).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(f.value(0, i, j), f.value(0, j, i));
            }
        }
    }

    #[test]
    fn complete_network_has_no_mle() {
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push((i, j));
            }
        }
        let net = AdjacencyNetwork::from_edges(5, &edges).unwrap();
        let x2 = DMatrix::from_fn(5, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let feats = dyad_features(&x2, DyadFeatureKind::Product).unwrap();
        let err = fit_joint_mle(&net, &feats, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MleNonexistent { .. }));
    }

    #[test]
    fn constant_feature_is_collinear() {
        // 3-node path with product features of constant x2.
        let net = AdjacencyNetwork::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let x2 = DMatrix::from_element(3, 1, 1.0);
        let feats = dyad_features(&x2, DyadFeatureKind::Product).unwrap();
        let err = fit_joint_mle(&net, &feats, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CollinearFeatures { coord: 0 }));
    }

    #[test]
    fn node_root_matches_bisection_oracle() {
        // 10-node instance: compare the safeguarded Newton root with a plain
        // bisection to 1e-9.
        let partner: Vec<f64> = (0..9).map(|j| 0.3 * j as f64 - 1.2).collect();
        let deg = 4.0;
        let newton = solve_node_root(deg, &partner, 0.0);
        let score = |x: f64| -> f64 {
            deg - partner.iter().map(|&b| logistic(b + x)).sum::<f64>()
        };
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let bisect = 0.5 * (lo + hi);
        assert!(
            (newton - bisect).abs() < 1e-9,
            "newton {newton} bisect {bisect}"
        );
    }

    #[test]
    fn zero_score_leaves_a_unchanged() {
        // Root finder started at the exact root returns it unchanged.
        let partner = vec![0.0; 6];
        // score(x) = 3 - 6 logistic(x) = 0 at x = 0.
        let root = solve_node_root(3.0, &partner, 0.0);
        assert!(root.abs() < 1e-12);
    }

    #[test]
    fn symmetric_graph_gives_equal_effects() {
        // 2-regular symmetric ring with symmetric features.
        let net = AdjacencyNetwork::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
            .unwrap();
        let x2 = DMatrix::from_fn(6, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let feats = dyad_features(&x2, DyadFeatureKind::Product).unwrap();
        let a = vec![0.1; 6];
        let lambda = vec![0.0];
        let next = profile_update_a(&lambda, &net, &feats, &a).unwrap();
        for w in next.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_design_parameters_on_simulated_network() {
        let mut cfg = DgpConfig::paper_design(150, 0.2, 0.0, 99);
        cfg.target_mean_degree = None;
        cfg.surplus_offset = 0.0;
        let x2 = dgp::draw_x2(&cfg, 0);
        let a = dgp::draw_heterogeneity(&cfg, &x2, 0);
        let net = dgp::form_links(&cfg, &x2, &a, 0).unwrap();
        let x2m = DMatrix::from_fn(150, 1, |i, _| x2[i]);
        let feats = dyad_features(&x2m, DyadFeatureKind::Product).unwrap();
        let fit = fit_joint_mle(&net, &feats, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.lambda_hat[0] - 1.0).abs() < 0.35,
            "lambda_hat = {}",
            fit.lambda_hat[0]
        );
        let max_err = fit
            .a_hat
            .iter()
            .zip(a.iter())
            .map(|(&ah, &av)| (ah - av).abs())
            .fold(0.0f64, f64::max);
        // sqrt(ln N / N) at N = 150 is about 0.18; allow a generous constant.
        assert!(max_err < 0.9, "max |a_hat - a| = {max_err}");
    }

    #[test]
    fn observed_information_is_positive_definite_at_optimum() {
        let mut cfg = DgpConfig::paper_design(40, 0.2, 0.0, 5);
        cfg.target_mean_degree = None;
        let x2 = dgp::draw_x2(&cfg, 1);
        let a = dgp::draw_heterogeneity(&cfg, &x2, 1);
        let net = dgp::form_links(&cfg, &x2, &a, 1).unwrap();
        let x2m = DMatrix::from_fn(40, 1, |i, _| x2[i]);
        let feats = dyad_features(&x2m, DyadFeatureKind::Product).unwrap();
        let opts = FitOptions {
            exclude_boundary: true,
            ..FitOptions::default()
        };
        let fit = fit_joint_mle(&net, &feats, &opts).unwrap();
        let retained = fit.retained();
        let info = observed_information(&net, &feats, &fit.lambda_hat, &fit.a_hat, &retained);
        let eig = info.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
    }

    #[test]
    fn permutation_equivariance() {
        let mut cfg = DgpConfig::paper_design(30, 0.2, 0.0, 17);
        cfg.target_mean_degree = None;
        let x2 = dgp::draw_x2(&cfg, 2);
        let a = dgp::draw_heterogeneity(&cfg, &x2, 2);
        let net = dgp::form_links(&cfg, &x2, &a, 2).unwrap();
        let n = 30;
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut d2 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d2[(i, j)] = net.dense()[(perm[i], perm[j])];
            }
        }
        let net2 = AdjacencyNetwork::from_dense(d2).unwrap();
        let x2m = DMatrix::from_fn(n, 1, |i, _| x2[i]);
        let x2m2 = DMatrix::from_fn(n, 1, |i, _| x2[perm[i]]);
        let f1 = dyad_features(&x2m, DyadFeatureKind::Product).unwrap();
        let f2 = dyad_features(&x2m2, DyadFeatureKind::Product).unwrap();
        let opts = FitOptions {
            exclude_boundary: true,
            ..FitOptions::default()
        };
        let fit1 = fit_joint_mle(&net, &f1, &opts).unwrap();
        let fit2 = fit_joint_mle(&net2, &f2, &opts).unwrap();
        assert!((fit1.lambda_hat[0] - fit2.lambda_hat[0]).abs() < 1e-6);
        for i in 0..n {
            let (v1, v2) = (fit1.a_hat[perm[i]], fit2.a_hat[i]);
            match (v1.is_finite(), v2.is_finite()) {
                (true, true) => assert!((v1 - v2).abs() < 1e-6),
                (false, false) => {}
                _ => panic!("exclusion sets differ under permutation"),
            }
        }
    }
}
