//! Dependence measures and independence tests for paired samples.
//!
//! - [`stats`]: distance covariance/correlation, biased and unbiased HSIC,
//!   Feuerverger's rank-score statistic.
//! - [`null`]: permutation and Gamma-approximation null distributions.
//! - [`bench`]: rotation-mixing benchmark data.
//! - [`experiment`]: power curves over a `(θ, n, d, test)` grid.
//! - [`charfn`]: quadrature of the weighted characteristic-function distance,
//!   an independent route to biased HSIC.

pub mod bench;
pub mod charfn;
pub mod error;
pub mod experiment;
pub mod null;
pub mod report;
pub mod rng;
pub mod sample;
pub mod scores;
pub mod stats;

pub use error::{DepError, Result};
pub use null::{run_test, NullEstimate, NullModel, TestConfig, TestResult};
pub use sample::{Bandwidth, DistanceMatrix, GramMatrix, Matrix, PairedSample};
pub use stats::{StatKind, StatValue};
