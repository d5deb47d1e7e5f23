//! Rotation-mixing benchmark: two independent standardized sources are
//! rotated by an angle θ, padded with Gaussian noise up to `d` dimensions and
//! mixed by independent Haar-random orthogonal matrices. The outputs are
//! dependent but uncorrelated for θ > 0 and independent at θ = 0.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{DepError, Result};
use crate::rng::substream;
use crate::sample::{Matrix, PairedSample};

/// Standard deviation of each component of the two-Gaussian mixture.
pub const MIX_COMPONENT_SD: f64 = 0.5;

/// Zero-mean, unit-variance source laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDensity {
    /// `½N(−μ, s²) + ½N(μ, s²)` with `s = 0.5`, `μ = √(1 − s²)`.
    TwoGaussianMix,
    /// Laplace with scale `1/√2`.
    Laplace,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Student t with 5 degrees of freedom, scaled by `√(3/5)`.
    StudentT5,
    /// `Exp(1) − 1`.
    ExpCentered,
}

impl SourceDensity {
    pub const ALL: [SourceDensity; 5] = [
        SourceDensity::TwoGaussianMix,
        SourceDensity::Laplace,
        SourceDensity::Uniform,
        SourceDensity::StudentT5,
        SourceDensity::ExpCentered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceDensity::TwoGaussianMix => "two-gaussian-mix",
            SourceDensity::Laplace => "laplace",
            SourceDensity::Uniform => "uniform",
            SourceDensity::StudentT5 => "student-t5",
            SourceDensity::ExpCentered => "exp-centered",
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            SourceDensity::TwoGaussianMix => {
                let mu = (1.0 - MIX_COMPONENT_SD * MIX_COMPONENT_SD).sqrt();
                let z: f64 = StandardNormal.sample(rng);
                let centre = if rng.random::<bool>() { mu } else { -mu };
                centre + MIX_COMPONENT_SD * z
            }
            SourceDensity::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * std::f64::consts::FRAC_1_SQRT_2
            }
            SourceDensity::Uniform => {
                let half = 3f64.sqrt();
                rng.random_range(-half..=half)
            }
            SourceDensity::StudentT5 => {
                let t: f64 = StudentT::new(5.0).expect("valid dof").sample(rng);
                t * (3.0f64 / 5.0).sqrt()
            }
            SourceDensity::ExpCentered => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }
}

impl fmt::Display for SourceDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceDensity {
    type Err = DepError;
    fn from_str(s: &str) -> Result<Self> {
        SourceDensity::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| DepError::invalid(format!("unknown density '{s}'")))
    }
}

/// `n` i.i.d. draws.
pub fn sample_source<R: Rng + ?Sized>(density: SourceDensity, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| density.draw(rng)).collect()
}

/// `x' = cosθ·x − sinθ·y`, `y' = sinθ·x + cosθ·y`.
pub fn rotate_pair(x: &[f64], y: &[f64], theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(DepError::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let (s, c) = theta.sin_cos();
    Ok(x.iter().zip(y).map(|(&a, &b)| (c * a - s * b, s * a + c * b)).unzip())
}

/// Haar-distributed `d×d` orthogonal matrix: QR of a Gaussian matrix with
/// the signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    assert!(d >= 1, "dimension must be positive");
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn check_dim(d: usize) -> Result<()> {
    if matches!(d, 1 | 2 | 4) {
        Ok(())
    } else {
        Err(DepError::invalid(format!("d must be 1, 2 or 4, got {d}")))
    }
}

fn pad_and_mix<R: Rng + ?Sized>(first: &[f64], d: usize, rng: &mut R) -> Matrix {
    let n = first.len();
    let mut padded = Matrix::from_fn(n, d, |i, j| if j == 0 { first[i] } else { 0.0 });
    for j in 1..d {
        for i in 0..n {
            padded[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let q = random_orthogonal(d, rng);
    padded * q.transpose()
}

/// Pads each source to `d` columns with standard normal noise and applies an
/// independent random rotation per side. `d = 1` passes the data through.
pub fn embed_mix<R: Rng + ?Sized>(x: &[f64], y: &[f64], d: usize, rng: &mut R) -> Result<PairedSample> {
    check_dim(d)?;
    if x.len() != y.len() {
        return Err(DepError::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if d == 1 {
        return PairedSample::from_columns(x, y);
    }
    let xm = pad_and_mix(x, d, rng);
    let ym = pad_and_mix(y, d, rng);
    PairedSample::new(xm, ym)
}

/// Largest accepted angle. Inputs up to `1e-4` above π/4 are clamped to π/4 so
/// that rounded command-line values such as `0.7854` are accepted.
pub const MAX_THETA: f64 = FRAC_PI_4;
const THETA_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub theta: f64,
    pub d: usize,
    pub n: usize,
    pub density_x: SourceDensity,
    pub density_y: SourceDensity,
    pub seed: u64,
}

impl MixConfig {
    pub fn new(theta: f64, d: usize, n: usize, seed: u64) -> Self {
        MixConfig {
            theta,
            d,
            n,
            density_x: SourceDensity::TwoGaussianMix,
            density_y: SourceDensity::TwoGaussianMix,
            seed,
        }
    }

    /// Checks ranges and returns the config with θ clamped into `[0, π/4]`.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.theta >= 0.0 && self.theta <= MAX_THETA + THETA_SLACK) {
            return Err(DepError::invalid(format!("theta must lie in [0, pi/4], got {}", self.theta)));
        }
        self.theta = self.theta.min(MAX_THETA);
        check_dim(self.d)?;
        if self.n < 2 {
            return Err(DepError::InsufficientSample { needed: 2, got: self.n });
        }
        Ok(self)
    }
}

/// Full pipeline: sources, rotation, padding and orthogonal mixing, each
/// stage drawing from its own labelled substream of `config.seed`.
pub fn generate_instance(config: &MixConfig) -> Result<PairedSample> {
    let config = config.validated()?;
    let x = sample_source(config.density_x, config.n, &mut substream(config.seed, "source-x"));
    let y = sample_source(config.density_y, config.n, &mut substream(config.seed, "source-y"));
    let (xr, yr) = rotate_pair(&x, &y, config.theta)?;
    embed_mix(&xr, &yr, config.d, &mut substream(config.seed, "embed"))
}
