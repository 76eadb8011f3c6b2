//! Network containers and the linear algebra specific to linear-in-means
//! peer-effects models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Undirected 0/1 adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyNetwork {
    n: usize,
    d: DMatrix<f64>,
}

impl AdjacencyNetwork {
    /// Validates symmetry, zero diagonal, and 0/1 entries.
    pub fn from_dense(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::DegenerateNetwork(format!(
                    "nonzero diagonal at node {i}"
                )));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::DegenerateNetwork(format!(
                        "entry ({i},{j}) = {v} is not 0/1"
                    )));
                }
                if d[(j, i)] != v {
                    return Err(Error::DegenerateNetwork(format!(
                        "asymmetric entries at ({i},{j})"
                    )));
                }
            }
        }
        Ok(AdjacencyNetwork { n, d })
    }

    /// Builds from an undirected edge list with 0-based node ids.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut d = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i == j {
                return Err(Error::DegenerateNetwork(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({i},{j}) out of bounds for n = {n}"
                )));
            }
            d[(i, j)] = 1.0;
            d[(j, i)] = 1.0;
        }
        Ok(AdjacencyNetwork { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.d[(i, j)] == 1.0
    }

    /// Node degrees.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.d.row(i).iter().map(|&v| v as usize).sum())
            .collect()
    }

    /// Canonical `i < j` edge list.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.d[(i, j)] == 1.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Row-stochastic peer weight matrix. Rows of isolated nodes are all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerWeights {
    g: DMatrix<f64>,
}

impl PeerWeights {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.g
    }
}

/// Outcome-equation coefficients (endogenous, own, contextual).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoefVector {
    pub beta1: f64,
    pub beta2: Vec<f64>,
    pub beta3: Vec<f64>,
}

impl CoefVector {
    pub fn new(beta1: f64, beta2: Vec<f64>, beta3: Vec<f64>) -> Self {
        CoefVector {
            beta1,
            beta2,
            beta3,
        }
    }

    /// Flat (beta1, beta2', beta3')' layout matching `[Gy, X1, GX1]` columns.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.beta2.len() + self.beta3.len());
        v.push(self.beta1);
        v.extend_from_slice(&self.beta2);
        v.extend_from_slice(&self.beta3);
        v
    }

    pub fn from_flat(flat: &[f64], p: usize) -> Self {
        assert_eq!(flat.len(), 1 + 2 * p, "flat coefficient length");
        CoefVector {
            beta1: flat[0],
            beta2: flat[1..1 + p].to_vec(),
            beta3: flat[1 + p..].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta1.abs() >= 1.0 {
            return Err(Error::NonContraction(self.beta1));
        }
        if self.beta2.len() != self.beta3.len() {
            return Err(Error::DimensionMismatch(
                "beta2 and beta3 must have equal length".into(),
            ));
        }
        Ok(())
    }
}

/// Row-normalizes the adjacency matrix; isolated nodes keep an all-zero row.
pub fn row_normalize(net: &AdjacencyNetwork) -> PeerWeights {
    let n = net.n();
    let mut g = net.dense().clone();
    for i in 0..n {
        let deg: f64 = g.row(i).sum();
        if deg > 0.0 {
            for j in 0..n {
                g[(i, j)] /= deg;
            }
        }
    }
    PeerWeights { g }
}

/// Degrees scaled by `N - 1`; each entry lies in [0, 1].
pub fn scaled_degrees(net: &AdjacencyNetwork) -> Result<Vec<f64>> {
    let n = net.n();
    if n < 2 {
        return Err(Error::DegenerateNetwork(format!(
            "scaled degrees need n >= 2, got {n}"
        )));
    }
    Ok(net
        .degrees()
        .into_iter()
        .map(|d| d as f64 / (n as f64 - 1.0))
        .collect())
}

/// `G^power * m` for `power` in {1, 2}: peer averages and peers-of-peers
/// averages of the columns of `m`.
pub fn peer_aggregate(w: &PeerWeights, m: &DMatrix<f64>, power: u32) -> Result<DMatrix<f64>> {
    if !(1..=2).contains(&power) {
        return Err(Error::InvalidConfig(format!(
            "peer_aggregate power must be 1 or 2, got {power}"
        )));
    }
    if m.nrows() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, network has {} nodes",
            m.nrows(),
            w.n()
        )));
    }
    let mut out = w.dense() * m;
    if power == 2 {
        out = w.dense() * out;
    }
    Ok(out)
}

/// Solves the simultaneous outcome system `(I - beta1 G) y = X1 b2 + G X1 b3 + r`
/// by a dense LU factorization. The system matrix is strictly diagonally
/// dominant for |beta1| < 1, so the solve is exact to machine precision.
pub fn solve_outcomes(
    w: &PeerWeights,
    coef: &CoefVector,
    x1: &DMatrix<f64>,
    h_plus_eps: &DVector<f64>,
) -> Result<DVector<f64>> {
    coef.validate()?;
    let n = w.n();
    if x1.nrows() != n || h_plus_eps.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x1 has {} rows, shifter has {} entries, network has {n} nodes",
            x1.nrows(),
            h_plus_eps.len()
        )));
    }
    if x1.ncols() != coef.beta2.len() {
        return Err(Error::DimensionMismatch(format!(
            "x1 has {} columns but beta2 has {} entries",
            x1.ncols(),
            coef.beta2.len()
        )));
    }
    let b2 = DVector::from_column_slice(&coef.beta2);
    let b3 = DVector::from_column_slice(&coef.beta3);
    let rhs = x1 * b2 + (w.dense() * x1) * b3 + h_plus_eps;
    let system = DMatrix::identity(n, n) - w.dense() * coef.beta1;
    system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Identification("outcome system solve failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_network() -> AdjacencyNetwork {
        AdjacencyNetwork::from_edges(2, &[(0, 1)]).unwrap()
    }

    fn ring(n: usize) -> AdjacencyNetwork {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        AdjacencyNetwork::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn row_normalize_single_link_rows() {
        let g = row_normalize(&swap_network());
        assert_eq!(g.dense()[(0, 1)], 1.0);
        assert_eq!(g.dense()[(1, 0)], 1.0);
        assert_eq!(g.dense()[(0, 0)], 0.0);
    }

    #[test]
    fn row_normalize_equal_split() {
        let net = AdjacencyNetwork::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let g = row_normalize(&net);
        assert_eq!(g.dense()[(0, 1)], 0.5);
        assert_eq!(g.dense()[(0, 2)], 0.5);
    }

    #[test]
    fn row_normalize_isolated_row_is_zero() {
        let net = AdjacencyNetwork::from_edges(3, &[(0, 1)]).unwrap();
        let g = row_normalize(&net);
        for j in 0..3 {
            assert_eq!(g.dense()[(2, j)], 0.0);
        }
    }

    #[test]
    fn scaled_degrees_direct_count() {
        let net =
            AdjacencyNetwork::from_edges(10, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let d = scaled_degrees(&net).unwrap();
        assert!((d[0] - 3.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_degrees_empty_and_complete() {
        let n = 6;
        let empty = AdjacencyNetwork::from_edges(n, &[]).unwrap();
        assert!(scaled_degrees(&empty).unwrap().iter().all(|&v| v == 0.0));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        let complete = AdjacencyNetwork::from_edges(n, &edges).unwrap();
        assert!(scaled_degrees(&complete).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn scaled_degrees_rejects_tiny_network() {
        let net = AdjacencyNetwork::from_edges(1, &[]).unwrap();
        assert!(matches!(
            scaled_degrees(&net),
            Err(Error::DegenerateNetwork(_))
        ));
    }

    #[test]
    fn peer_aggregate_swap_and_involution() {
        let g = row_normalize(&swap_network());
        let m = DMatrix::from_column_slice(2, 1, &[3.0, -7.0]);
        let p1 = peer_aggregate(&g, &m, 1).unwrap();
        assert_eq!(p1[(0, 0)], -7.0);
        assert_eq!(p1[(1, 0)], 3.0);
        let p2 = peer_aggregate(&g, &m, 2).unwrap();
        assert_eq!(p2[(0, 0)], 3.0);
        assert_eq!(p2[(1, 0)], -7.0);
    }

    #[test]
    fn peer_aggregate_preserves_constants_on_ring() {
        let g = row_normalize(&ring(4));
        let m = DMatrix::from_element(4, 1, 2.5);
        for power in 1..=2 {
            let p = peer_aggregate(&g, &m, power).unwrap();
            for i in 0..4 {
                assert!((p[(i, 0)] - 2.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn peer_aggregate_rejects_bad_dims() {
        let g = row_normalize(&ring(4));
        let m = DMatrix::zeros(3, 1);
        assert!(peer_aggregate(&g, &m, 1).is_err());
    }

    #[test]
    fn solve_outcomes_no_endogenous_term() {
        let g = row_normalize(&ring(5));
        let x1 = DMatrix::from_fn(5, 1, |i, _| i as f64 - 2.0);
        let shift = DVector::from_fn(5, |i, _| 0.1 * i as f64);
        let coef = CoefVector::new(0.0, vec![2.0], vec![0.0]);
        let y = solve_outcomes(&g, &coef, &x1, &shift).unwrap();
        for i in 0..5 {
            assert!((y[i] - (2.0 * x1[(i, 0)] + shift[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_outcomes_matches_hand_2x2_inverse() {
        // 2-node swap network, beta1 = 0.5:
        //   (I - 0.5 G) = [[1, -0.5], [-0.5, 1]], inverse = (1/0.75)[[1, 0.5], [0.5, 1]]
        let g = row_normalize(&swap_network());
        let coef = CoefVector::new(0.5, vec![0.0], vec![0.0]);
        let x1 = DMatrix::zeros(2, 1);
        let (r1, r2) = (1.3, -0.4);
        let y = solve_outcomes(&g, &coef, &x1, &DVector::from_column_slice(&[r1, r2])).unwrap();
        let expect0 = (r1 + 0.5 * r2) / 0.75;
        let expect1 = (r2 + 0.5 * r1) / 0.75;
        assert!((y[0] - expect0).abs() < 1e-12);
        assert!((y[1] - expect1).abs() < 1e-12);
    }

    #[test]
    fn solve_outcomes_matches_neumann_series() {
        // Truncated Neumann sum sum_{m<=200} beta1^m G^m rhs as an independent
        // oracle for the direct solve.
        let net = AdjacencyNetwork::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)],
        )
        .unwrap();
        let g = row_normalize(&net);
        let coef = CoefVector::new(0.6, vec![1.0], vec![-0.5]);
        let x1 = DMatrix::from_fn(6, 1, |i, _| (i as f64).sin());
        let shift = DVector::from_fn(6, |i, _| 0.3 * (i as f64).cos());
        let y = solve_outcomes(&g, &coef, &x1, &shift).unwrap();

        let b2 = DVector::from_column_slice(&coef.beta2);
        let b3 = DVector::from_column_slice(&coef.beta3);
        let rhs = &x1 * b2 + (g.dense() * &x1) * b3 + &shift;
        let mut acc = rhs.clone();
        let mut term = rhs;
        for _ in 0..200 {
            term = g.dense() * term * coef.beta1;
            acc += &term;
        }
        assert!((&y - &acc).amax() < 1e-8);
    }

    #[test]
    fn solve_outcomes_rejects_non_contraction() {
        let g = row_normalize(&swap_network());
        let coef = CoefVector::new(1.0, vec![0.0], vec![0.0]);
        let x1 = DMatrix::zeros(2, 1);
        assert!(matches!(
            solve_outcomes(&g, &coef, &x1, &DVector::zeros(2)),
            Err(Error::NonContraction(_))
        ));
    }

    #[test]
    fn from_dense_validates() {
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 1)] = 1.0;
        assert!(AdjacencyNetwork::from_dense(d.clone()).is_err()); // asymmetric
        d[(1, 0)] = 1.0;
        assert!(AdjacencyNetwork::from_dense(d.clone()).is_ok());
        d[(2, 2)] = 1.0;
        assert!(AdjacencyNetwork::from_dense(d.clone()).is_err()); // diagonal
        d[(2, 2)] = 0.0;
        d[(0, 2)] = 0.5;
        d[(2, 0)] = 0.5;
        assert!(AdjacencyNetwork::from_dense(d).is_err()); // not 0/1
    }
}
