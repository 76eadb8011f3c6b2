//! Residualized two-stage least squares with a menu of control functions,
//! plus the heteroskedasticity-robust sandwich covariance.
//!
//! Every control variant applies one joint projection to the outcome, the
//! regressors `W = [Gy, X1, GX1]`, and the instruments `Z = [X1, GX1, G2X1]`,
//! then runs 2SLS on the residualized data. The control design always spans
//! constants: an intercept column is prepended when the basis family does not
//! already include one (per x2 level for the interaction control), so
//! conditional means are absorbed for every family.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::felogit::LinkModelFit;
use crate::network::{self, CoefVector, PeerWeights};
use crate::sieve::{self, SieveBasis};

/// Which conditional-mean control is projected out before 2SLS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// Plain 2SLS, no control.
    None,
    /// Intercept plus the estimated heterogeneity, linearly.
    LinearAHat,
    /// Sieve in the estimated heterogeneity.
    SieveAHat,
    /// Sieve in the scaled degree, interacted with x2 levels.
    SieveX2Deg,
    /// The true `h(a)` evaluated pointwise (simulation benchmark).
    OracleH,
}

/// A control-function choice for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub kind: ControlKind,
    #[serde(default)]
    pub basis: Option<SieveBasis>,
    /// Enforce that no outcome regressor coincides with the network
    /// covariate; forced on for the (x2, degree) control.
    #[serde(default = "default_true")]
    pub drop_overlap: bool,
}

fn default_true() -> bool {
    true
}

impl ControlSpec {
    pub fn none() -> Self {
        ControlSpec {
            kind: ControlKind::None,
            basis: None,
            drop_overlap: true,
        }
    }

    pub fn linear_a_hat() -> Self {
        ControlSpec {
            kind: ControlKind::LinearAHat,
            basis: None,
            drop_overlap: true,
        }
    }

    pub fn sieve_a_hat(basis: SieveBasis) -> Self {
        ControlSpec {
            kind: ControlKind::SieveAHat,
            basis: Some(basis),
            drop_overlap: true,
        }
    }

    pub fn sieve_x2_deg(basis: SieveBasis) -> Self {
        ControlSpec {
            kind: ControlKind::SieveX2Deg,
            basis: Some(basis),
            drop_overlap: true,
        }
    }

    pub fn oracle_h() -> Self {
        ControlSpec {
            kind: ControlKind::OracleH,
            basis: None,
            drop_overlap: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_basis = matches!(self.kind, ControlKind::SieveAHat | ControlKind::SieveX2Deg);
        if needs_basis != self.basis.is_some() {
            return Err(Error::InvalidConfig(format!(
                "control kind {:?} {} a sieve basis",
                self.kind,
                if needs_basis {
                    "requires"
                } else {
                    "does not take"
                }
            )));
        }
        if matches!(self.kind, ControlKind::SieveX2Deg) && !self.drop_overlap {
            log::warn!("sieve-x2-deg with overlap enforcement disabled");
        }
        Ok(())
    }

    /// Short label used in Monte Carlo tables and CSV records.
    pub fn label(&self) -> String {
        let head = match self.kind {
            ControlKind::None => "none",
            ControlKind::LinearAHat => "linear-a",
            ControlKind::SieveAHat => "sieve-a",
            ControlKind::SieveX2Deg => "sieve-xdeg",
            ControlKind::OracleH => "oracle",
        };
        match self.basis {
            Some(b) => format!(
                "{head}[{}K{}]",
                match b.family {
                    sieve::BasisFamily::Polynomial => "poly",
                    sieve::BasisFamily::Hermite => "hermite",
                },
                b.k
            ),
            None => head.to_string(),
        }
    }
}

/// Regressors and instruments of the peer-effects equation.
#[derive(Debug, Clone)]
pub struct InstrumentSet {
    /// `[Gy, X1, GX1]`, n x (1 + 2p)
    pub w: DMatrix<f64>,
    /// `[X1, GX1, G^2 X1]`, n x 3p
    pub z: DMatrix<f64>,
}

/// Builds the regressor and instrument blocks from peer aggregates.
pub fn build_wz(sample: &Sample, weights: &PeerWeights) -> Result<InstrumentSet> {
    let n = sample.n();
    if weights.n() != n {
        return Err(Error::DimensionMismatch(
            "weights and sample node counts differ".into(),
        ));
    }
    let p = sample.x1.ncols();
    let gy = network::peer_aggregate(weights, &DMatrix::from_column_slice(n, 1, sample.y.as_slice()), 1)?;
    let gx1 = network::peer_aggregate(weights, &sample.x1, 1)?;
    let g2x1 = network::peer_aggregate(weights, &sample.x1, 2)?;
    let mut w = DMatrix::zeros(n, 1 + 2 * p);
    w.column_mut(0).copy_from(&gy.column(0));
    w.view_mut((0, 1), (n, p)).copy_from(&sample.x1);
    w.view_mut((0, 1 + p), (n, p)).copy_from(&gx1);
    let mut z = DMatrix::zeros(n, 3 * p);
    z.view_mut((0, 0), (n, p)).copy_from(&sample.x1);
    z.view_mut((0, p), (n, p)).copy_from(&gx1);
    z.view_mut((0, 2 * p), (n, p)).copy_from(&g2x1);
    Ok(InstrumentSet { w, z })
}

/// Relative singular-value tolerance for rank decisions.
const RANK_RTOL: f64 = 1e-10;
/// Condition number above which moment matrices are flagged.
const COND_WARN: f64 = 1e10;

fn svd_rank_cond(m: &DMatrix<f64>) -> (usize, f64) {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return (0, f64::INFINITY);
    }
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_RTOL * smax)
        .count();
    (rank, smax / smin.max(f64::MIN_POSITIVE))
}

/// Two-stage least squares
/// `beta = (W'Z (Z'Z)^-1 Z'W)^-1 W'Z (Z'Z)^-1 Z'y`.
pub fn two_sls(y: &DVector<f64>, w: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = y.len();
    if w.nrows() != n || z.nrows() != n {
        return Err(Error::DimensionMismatch("row counts differ".into()));
    }
    if z.ncols() < w.ncols() || n <= z.ncols() {
        return Err(Error::Precondition(format!(
            "need n > cols(Z) >= cols(W), got n = {n}, Z = {}, W = {}",
            z.ncols(),
            w.ncols()
        )));
    }
    let ztz = z.transpose() * z;
    let (rank, cond) = svd_rank_cond(&ztz);
    if rank < z.ncols() {
        return Err(Error::Identification(format!(
            "Z'Z singular: rank {rank} < {}, cond {cond:.3e}",
            z.ncols()
        )));
    }
    if cond > COND_WARN {
        log::warn!("Z'Z condition number {cond:.3e} exceeds {COND_WARN:.0e}");
    }
    let ztz_lu = ztz.lu();
    let ztw = z.transpose() * w;
    let zty = z.transpose() * y;
    let ztz_inv_ztw = ztz_lu
        .solve(&ztw)
        .ok_or_else(|| Error::Identification("Z'Z solve failed".into()))?;
    let ztz_inv_zty = ztz_lu
        .solve(&zty)
        .ok_or_else(|| Error::Identification("Z'Z solve failed".into()))?;
    let a = ztw.transpose() * &ztz_inv_ztw;
    let b = ztw.transpose() * &ztz_inv_zty;
    let (rank_a, cond_a) = svd_rank_cond(&a);
    if rank_a < a.ncols() {
        return Err(Error::Identification(format!(
            "projected design singular: rank {rank_a} < {}, cond {cond_a:.3e}",
            a.ncols()
        )));
    }
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Identification("projected design solve failed".into()))
}

/// Sandwich estimator of the asymptotic covariance of `sqrt(N)(beta - beta0)`:
/// bread `S^wz (S^zz)^-1 (S^wz)'`, filling `S^zz-sigma = mean z z' eta^2` with
/// `eta = y - W beta`.
pub fn robust_variance(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = y.len() as f64;
    let eta = y - w * beta;
    let swz = w.transpose() * z / n;
    let szz = z.transpose() * z / n;
    let mut szzs = DMatrix::zeros(z.ncols(), z.ncols());
    for i in 0..y.len() {
        let zi = z.row(i);
        let e2 = eta[i] * eta[i];
        for r in 0..z.ncols() {
            for c in 0..z.ncols() {
                szzs[(r, c)] += zi[r] * zi[c] * e2;
            }
        }
    }
    szzs /= n;
    let szz_lu = szz.clone().lu();
    let szz_inv_swzt = szz_lu
        .solve(&swz.transpose())
        .ok_or_else(|| Error::Identification("S^zz singular in variance".into()))?;
    let bread = &swz * &szz_inv_swzt;
    let bread_lu = bread.clone().lu();
    let filling = szz_inv_swzt.transpose() * &szzs * &szz_inv_swzt;
    let half = bread_lu
        .solve(&filling)
        .ok_or_else(|| Error::Identification("bread matrix singular".into()))?;
    let omega = bread_lu
        .solve(&half.transpose())
        .ok_or_else(|| Error::Identification("bread matrix singular".into()))?;
    // Exact symmetry against accumulated round-off.
    Ok((&omega + omega.transpose()) * 0.5)
}

/// Result of one estimator run.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub beta_hat: CoefVector,
    /// Asymptotic covariance of `sqrt(N)(beta_hat - beta0)`.
    pub omega_hat: DMatrix<f64>,
    /// `sqrt(diag(omega_hat) / n_used)`.
    pub se: Vec<f64>,
    /// Column count of the control design (0 for the uncontrolled fit).
    pub k_used: usize,
    pub first_stage_rank: usize,
    /// 2SLS residual on the residualized data, one entry per used row.
    pub residual_eta: DVector<f64>,
    /// Original row indices used (after boundary-node drops).
    pub rows_used: Vec<usize>,
    pub n_dropped: usize,
    pub control_rank: usize,
}

/// Extra inputs an estimator variant may need.
#[derive(Debug, Clone, Default)]
pub struct EstimateAux<'a> {
    /// Link-model fit; required by the `LinearAHat` / `SieveAHat` kinds.
    pub fit: Option<&'a LinkModelFit>,
    /// True `h(a_i)` values; required by `OracleH`.
    pub oracle_h: Option<DVector<f64>>,
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

fn select_vec(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |r, _| v[rows[r]])
}

/// Runs one control-function 2SLS estimate on a sample.
pub fn estimate(
    sample: &Sample,
    weights: &PeerWeights,
    ctrl: &ControlSpec,
    aux: &EstimateAux,
) -> Result<EstimateResult> {
    ctrl.validate()?;
    let n = sample.n();
    let p = sample.x1.ncols();
    let iv = build_wz(sample, weights)?;

    // Listwise drop of nodes without a fixed-effect estimate.
    let rows_used: Vec<usize> = match ctrl.kind {
        ControlKind::LinearAHat | ControlKind::SieveAHat => {
            let fit = aux.fit.ok_or_else(|| {
                Error::Precondition("control in a_hat requires a link-model fit".into())
            })?;
            if fit.a_hat.len() != n {
                return Err(Error::DimensionMismatch(
                    "fit covers a different node count".into(),
                ));
            }
            fit.retained()
        }
        _ => (0..n).collect(),
    };
    let n_used = rows_used.len();
    let n_dropped = n - n_used;

    // Control design on the used rows.
    let design: Option<DMatrix<f64>> = match ctrl.kind {
        ControlKind::None => None,
        ControlKind::LinearAHat => {
            let fit = aux.fit.expect("checked above");
            let a_hat = DVector::from_fn(n_used, |r, _| fit.a_hat[rows_used[r]]);
            let mut d = DMatrix::zeros(n_used, 2);
            d.column_mut(0).fill(1.0);
            d.column_mut(1).copy_from(&a_hat);
            Some(d)
        }
        ControlKind::SieveAHat => {
            let fit = aux.fit.expect("checked above");
            let basis = ctrl.basis.expect("validated");
            let a_hat = DVector::from_fn(n_used, |r, _| fit.a_hat[rows_used[r]]);
            let mapped = sieve::affine_map_to_unit(&a_hat);
            let cols = sieve::eval_basis(&basis, &mapped)?;
            Some(prepend_intercept_if_needed(&basis, cols))
        }
        ControlKind::SieveX2Deg => {
            if ctrl.drop_overlap {
                for c in 0..p {
                    let coincides = (0..n).all(|i| sample.x1[(i, c)] == sample.x2[i]);
                    if coincides {
                        return Err(Error::Precondition(format!(
                            "outcome regressor column {c} coincides with the network covariate; \
                             the (x2, degree) control cannot identify its coefficients"
                        )));
                    }
                }
            }
            let basis = ctrl.basis.expect("validated");
            let deg = DVector::from_column_slice(&network::scaled_degrees(&sample.network)?);
            let mapped = sieve::affine_map_to_unit(&deg);
            Some(sieve::eval_interaction_basis(
                &basis,
                &sample.x2,
                &mapped,
                !basis.includes_intercept(),
            )?)
        }
        ControlKind::OracleH => {
            let h = aux
                .oracle_h
                .as_ref()
                .ok_or_else(|| Error::Precondition("oracle control requires h(a) values".into()))?;
            if h.len() != n {
                return Err(Error::DimensionMismatch("oracle h length".into()));
            }
            if sample.a.is_none() {
                return Err(Error::Precondition(
                    "oracle control is only available on simulated samples".into(),
                ));
            }
            let mut d = DMatrix::zeros(n_used, 2);
            d.column_mut(0).fill(1.0);
            for (r, &i) in rows_used.iter().enumerate() {
                d[(r, 1)] = h[i];
            }
            Some(d)
        }
    };

    // One joint projection of outcome, regressors, and instruments.
    let y_used = select_vec(&sample.y, &rows_used);
    let w_used = select_rows(&iv.w, &rows_used);
    let z_used = select_rows(&iv.z, &rows_used);
    let (y_t, w_t, z_t, k_used, control_rank) = match &design {
        None => (y_used, w_used, z_used, 0, 0),
        Some(d) => {
            let mut stack = DMatrix::zeros(n_used, 1 + w_used.ncols() + z_used.ncols());
            stack.column_mut(0).copy_from(&y_used);
            stack
                .view_mut((0, 1), (n_used, w_used.ncols()))
                .copy_from(&w_used);
            stack
                .view_mut((0, 1 + w_used.ncols()), (n_used, z_used.ncols()))
                .copy_from(&z_used);
            let res = sieve::residualize(d, &stack)?;
            let r = res.residuals;
            (
                DVector::from_column_slice(r.column(0).as_slice()),
                r.view((0, 1), (n_used, w_used.ncols())).into_owned(),
                r.view((0, 1 + w_used.ncols()), (n_used, z_used.ncols()))
                    .into_owned(),
                d.ncols(),
                res.design_rank,
            )
        }
    };

    // Empirical rank condition on the cross-moment matrix.
    let swz = w_t.transpose() * &z_t / n_used as f64;
    let (fs_rank, _) = svd_rank_cond(&swz);
    if fs_rank < w_t.ncols() {
        return Err(Error::Identification(format!(
            "cross moment W~'Z~ has rank {fs_rank} < {}; control absorbed identifying variation",
            w_t.ncols()
        )));
    }

    let beta = two_sls(&y_t, &w_t, &z_t)?;
    let omega = robust_variance(&y_t, &w_t, &z_t, &beta)?;
    let eta = &y_t - &w_t * &beta;
    let se: Vec<f64> = (0..beta.len())
        .map(|j| (omega[(j, j)] / n_used as f64).sqrt())
        .collect();
    Ok(EstimateResult {
        beta_hat: CoefVector::from_flat(beta.as_slice(), p),
        omega_hat: omega,
        se,
        k_used,
        first_stage_rank: fs_rank,
        residual_eta: eta,
        rows_used,
        n_dropped,
        control_rank,
    })
}

fn prepend_intercept_if_needed(basis: &SieveBasis, cols: DMatrix<f64>) -> DMatrix<f64> {
    if basis.includes_intercept() {
        return cols;
    }
    let n = cols.nrows();
    let mut out = DMatrix::zeros(n, cols.ncols() + 1);
    out.column_mut(0).fill(1.0);
    out.view_mut((0, 1), (n, cols.ncols())).copy_from(&cols);
    out
}

/// Two-sided tests of `beta0` coordinate-wise at the given level; `true`
/// means reject.
pub fn t_reject(result: &EstimateResult, beta0: &CoefVector, level: f64) -> Vec<bool> {
    assert!(level > 0.0 && level < 1.0, "level in (0,1)");
    let q = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - level / 2.0);
    let est = result.beta_hat.flat();
    let truth = beta0.flat();
    est.iter()
        .zip(&truth)
        .zip(&result.se)
        .map(|((&b, &b0), &se)| (b - b0).abs() / se > q)
        .collect()
}
