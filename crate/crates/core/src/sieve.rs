//! Sieve bases, least-squares residualization, and leave-one-out
//! cross-validation for the truncation order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Basis families for the control-function sieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Powers 1, a, ..., a^{K-1}; the intercept is column one of K.
    Polynomial,
    /// Weighted physicists' Hermite functions H_k(a) e^{-a^2/2}, k = 1..K.
    Hermite,
}

/// A sieve basis: family plus truncation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SieveBasis {
    pub family: BasisFamily,
    pub k: usize,
}

impl SieveBasis {
    pub fn new(family: BasisFamily, k: usize) -> Self {
        SieveBasis { family, k }
    }

    /// Whether the evaluated columns already span constants.
    pub fn includes_intercept(&self) -> bool {
        matches!(self.family, BasisFamily::Polynomial)
    }
}

/// Affine map of sample points onto [-1, 1] by min/max. Constant inputs map
/// to zero. Basis spans are invariant to this reparameterization; it keeps
/// polynomial evaluation inside the documented domain and conditions the
/// Vandermonde-like columns.
pub fn affine_map_to_unit(points: &DVector<f64>) -> DVector<f64> {
    let lo = points.min();
    let hi = points.max();
    if hi - lo < 1e-300 {
        return DVector::zeros(points.len());
    }
    points.map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0)
}

/// Evaluates the basis columns at the given points.
///
/// Polynomial points outside [-1, 1] are clamped with a warning; callers that
/// standardize via [`affine_map_to_unit`] never trigger it.
pub fn eval_basis(basis: &SieveBasis, points: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = points.len();
    let k = basis.k;
    if k == 0 {
        return Err(Error::InvalidConfig("basis order K must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::Overparameterized { k, n });
    }
    let mut out = DMatrix::zeros(n, k);
    match basis.family {
        BasisFamily::Polynomial => {
            let mut clamped = 0usize;
            for i in 0..n {
                let mut v = points[i];
                if !(-1.0..=1.0).contains(&v) {
                    clamped += 1;
                    v = v.clamp(-1.0, 1.0);
                }
                let mut p = 1.0;
                for col in 0..k {
                    out[(i, col)] = p;
                    p *= v;
                }
            }
            if clamped > 0 {
                log::warn!("polynomial basis: clamped {clamped} point(s) into [-1, 1]");
            }
        }
        BasisFamily::Hermite => {
            for i in 0..n {
                let v = points[i];
                let weight = (-0.5 * v * v).exp();
                // H_{k+1}(v) = 2 v H_k(v) - 2 k H_{k-1}(v)
                let mut h_prev = 1.0;
                let mut h = 2.0 * v;
                for col in 0..k {
                    out[(i, col)] = h * weight;
                    let h_next = 2.0 * v * h - 2.0 * (col as f64 + 1.0) * h_prev;
                    h_prev = h;
                    h = h_next;
                }
            }
        }
    }
    Ok(out)
}

/// Interaction design for the (x2, degree) control: the degree-basis columns
/// crossed with indicators of each discrete x2 level, optionally with one
/// intercept column per level.
pub fn eval_interaction_basis(
    basis: &SieveBasis,
    x2: &DVector<f64>,
    control: &DVector<f64>,
    level_intercepts: bool,
) -> Result<DMatrix<f64>> {
    let n = x2.len();
    if control.len() != n {
        return Err(Error::DimensionMismatch(
            "x2 and control lengths differ".into(),
        ));
    }
    let mut levels: Vec<f64> = x2.iter().cloned().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite x2"));
    levels.dedup();
    let base = eval_basis(basis, control)?;
    let per_level = basis.k + usize::from(level_intercepts);
    let total = per_level * levels.len();
    if total >= n {
        return Err(Error::Overparameterized { k: total, n });
    }
    let mut out = DMatrix::zeros(n, total);
    for (li, &level) in levels.iter().enumerate() {
        for i in 0..n {
            if x2[i] == level {
                let mut col = li * per_level;
                if level_intercepts {
                    out[(i, col)] = 1.0;
                    col += 1;
                }
                for b in 0..basis.k {
                    out[(i, col + b)] = base[(i, b)];
                }
            }
        }
    }
    Ok(out)
}

/// Residuals of targets after projecting out the column span of a design.
#[derive(Debug, Clone)]
pub struct ResidualizedData {
    pub residuals: DMatrix<f64>,
    pub design_rank: usize,
    pub basis_used: Option<SieveBasis>,
}

/// Relative singular-value cutoff for the rank-revealing pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Orthonormal basis of the design's column space (left singular vectors at
/// singular values above `PINV_RTOL * s_max`).
fn column_space(design: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let svd = design.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd requested u");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > PINV_RTOL * smax && s > 0.0)
        .count();
    let mut basis = DMatrix::zeros(design.nrows(), rank);
    let mut col = 0;
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_RTOL * smax && s > 0.0 {
            basis.set_column(col, &u.column(idx));
            col += 1;
        }
    }
    Ok((basis, rank))
}

/// Least-squares projection residuals `targets - design design^+ targets`
/// using a rank-revealing pseudo-inverse; rank deficiency is handled, not an
/// error.
pub fn residualize(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<ResidualizedData> {
    let n = design.nrows();
    if targets.nrows() != n {
        return Err(Error::DimensionMismatch(
            "design and target row counts differ".into(),
        ));
    }
    if design.ncols() >= n {
        return Err(Error::Overparameterized {
            k: design.ncols(),
            n,
        });
    }
    let (u, rank) = column_space(design)?;
    let proj = &u * (u.transpose() * targets);
    Ok(ResidualizedData {
        residuals: targets - proj,
        design_rank: rank,
        basis_used: None,
    })
}

/// Control points for cross-validation.
#[derive(Debug, Clone)]
pub enum ControlPoints {
    /// A scalar control (estimated heterogeneity), standardized internally.
    Scalar(DVector<f64>),
    /// The (x2, scaled degree) pair; the degree is standardized internally
    /// and interacted with x2-level indicators plus per-level intercepts.
    X2Deg { x2: DVector<f64>, deg: DVector<f64> },
}

impl ControlPoints {
    fn design(&self, family: BasisFamily, k: usize) -> Result<DMatrix<f64>> {
        let basis = SieveBasis::new(family, k);
        match self {
            ControlPoints::Scalar(points) => {
                let mapped = affine_map_to_unit(points);
                let cols = eval_basis(&basis, &mapped)?;
                if basis.includes_intercept() {
                    Ok(cols)
                } else {
                    let n = cols.nrows();
                    let mut out = DMatrix::zeros(n, cols.ncols() + 1);
                    out.column_mut(0).fill(1.0);
                    out.view_mut((0, 1), (n, cols.ncols())).copy_from(&cols);
                    Ok(out)
                }
            }
            ControlPoints::X2Deg { x2, deg } => {
                let mapped = affine_map_to_unit(deg);
                eval_interaction_basis(&basis, x2, &mapped, !basis.includes_intercept())
            }
        }
    }
}

/// Per-K row of the cross-validation table.
#[derive(Debug, Clone)]
pub struct CvRow {
    pub k: usize,
    pub rmse: f64,
    /// False when some leverage reached one (interpolation) for this K.
    pub valid: bool,
}

/// Leave-one-out cross-validation over a K grid via the hat-matrix shortcut
/// `e_i / (1 - H_ii)`; returns the RMSE-minimizing K (ties toward smaller K)
/// plus the full table.
pub fn loo_cv_select(
    family: BasisFamily,
    k_grid: &[usize],
    control: &ControlPoints,
    targets: &DVector<f64>,
) -> Result<(usize, Vec<CvRow>)> {
    let n = targets.len();
    if k_grid.is_empty() {
        return Err(Error::InvalidConfig("empty K grid".into()));
    }
    if let Some(&kmax) = k_grid.iter().max() {
        if kmax + 1 >= n {
            return Err(Error::Overparameterized { k: kmax, n });
        }
    }
    let mut rows = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let design = match control.design(family, k) {
            Ok(d) => d,
            Err(Error::Overparameterized { .. }) => {
                rows.push(CvRow {
                    k,
                    rmse: f64::INFINITY,
                    valid: false,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let (u, _rank) = column_space(&design)?;
        let fitted = &u * (u.transpose() * targets);
        let mut sum_sq = 0.0;
        let mut valid = true;
        for i in 0..n {
            let h_ii: f64 = u.row(i).iter().map(|&v| v * v).sum();
            let denom = 1.0 - h_ii;
            if denom <= 1e-10 {
                valid = false;
                break;
            }
            let e_loo = (targets[i] - fitted[i]) / denom;
            sum_sq += e_loo * e_loo;
        }
        rows.push(CvRow {
            k,
            rmse: if valid {
                (sum_sq / n as f64).sqrt()
            } else {
                f64::INFINITY
            },
            valid,
        });
    }
    let best = rows
        .iter()
        .filter(|r| r.valid)
        .min_by(|a, b| {
            a.rmse
                .partial_cmp(&b.rmse)
                .expect("finite rmse")
                .then(a.k.cmp(&b.k))
        })
        .ok_or_else(|| Error::InvalidConfig("every K in the grid interpolates".into()))?;
    Ok((best.k, rows))
}
