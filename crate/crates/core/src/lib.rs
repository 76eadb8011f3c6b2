//! Semiparametric estimation of linear-in-means peer effects when the network
//! is endogenous.
//!
//! The crate provides the full desk-study pipeline:
//!
//! - [`network`]: adjacency containers, row-normalized peer weights, and the
//!   simultaneous outcome solve.
//! - [`dgp`]: the Monte Carlo data-generating process (covariates, degree
//!   heterogeneity, logistic dyad link formation, outcomes) with quadrature
//!   based density calibration.
//! - [`felogit`]: joint maximum likelihood for the dyadic logit with per-node
//!   fixed effects (homophily coefficient plus degree heterogeneity).
//! - [`sieve`]: polynomial / Hermite sieve bases, least-squares
//!   residualization, and leave-one-out cross-validation for the truncation
//!   order.
//! - [`estimators`]: residualized two-stage least squares with
//!   heteroskedasticity-robust sandwich covariance, under a menu of control
//!   functions.
//! - [`mc`]: the replication engine that reproduces bias / std / size tables.
//! - [`io`]: edge-list and CSV round trips shared by the CLI.

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod felogit;
pub mod io;
pub mod mc;
pub mod network;
pub mod quad;
pub mod rng;
pub mod sieve;

pub use dgp::{DgpConfig, HForm, Sample};
pub use error::{Error, Result};
pub use estimators::{ControlKind, ControlSpec, EstimateResult, InstrumentSet};
pub use felogit::{DyadFeatureKind, DyadFeatures, FitOptions, LinkModelFit};
pub use mc::{McConfig, McSummary};
pub use network::{AdjacencyNetwork, CoefVector, PeerWeights};
pub use sieve::{BasisFamily, ControlPoints, ResidualizedData, SieveBasis};
