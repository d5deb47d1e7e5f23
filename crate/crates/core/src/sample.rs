//! Sample containers and the distance / kernel primitives built on them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DepError, Result};

/// Dense real matrix, one observation per row.
pub type Matrix = DMatrix<f64>;

/// `n` paired observations `x` (n×p) and `y` (n×q).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    x: Matrix,
    y: Matrix,
}

impl PairedSample {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(DepError::invalid(format!(
                "row count mismatch: x has {}, y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < 2 {
            return Err(DepError::InsufficientSample { needed: 2, got: x.nrows() });
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(DepError::invalid("x and y need at least one column"));
        }
        check_finite(&x, "x")?;
        check_finite(&y, "y")?;
        Ok(PairedSample { x, y })
    }

    /// Univariate sample from two equal-length slices.
    pub fn from_columns(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(
            Matrix::from_column_slice(x.len(), 1, x),
            Matrix::from_column_slice(y.len(), 1, y),
        )
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Sample with the rows of `y` reordered: row `i` becomes `y[perm[i]]`.
    pub fn permute_y(&self, perm: &[usize]) -> Self {
        let y = Matrix::from_fn(self.n(), self.q(), |i, j| self.y[(perm[i], j)]);
        PairedSample { x: self.x.clone(), y }
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.x, self.y)
    }
}

fn check_finite(m: &Matrix, name: &str) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(idx) => Err(DepError::invalid(format!(
            "{name} has a non-finite entry at row {}, column {}",
            idx % m.nrows(),
            idx / m.nrows()
        ))),
    }
}

/// Kernel bandwidth σ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Bandwidth(sigma))
        } else {
            Err(DepError::InvalidBandwidth(sigma))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = DepError;
    fn try_from(v: f64) -> Result<Self> {
        Bandwidth::new(v)
    }
}

impl From<Bandwidth> for f64 {
    fn from(b: Bandwidth) -> f64 {
        b.0
    }
}

/// Pairwise Euclidean distances between the rows of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

/// Kernel evaluations over a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    k: Matrix,
    bandwidth: Option<Bandwidth>,
}

impl GramMatrix {
    /// Wraps an arbitrary square symmetric matrix, e.g. a precomputed kernel.
    pub fn from_matrix(k: Matrix) -> Result<Self> {
        if k.nrows() != k.ncols() {
            return Err(DepError::invalid(format!(
                "gram matrix must be square, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        check_finite(&k, "gram matrix")?;
        let n = k.nrows();
        for j in 0..n {
            for i in j + 1..n {
                let (a, b) = (k[(i, j)], k[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(DepError::invalid(format!("gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(GramMatrix { k, bandwidth: None })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn bandwidth(&self) -> Option<Bandwidth> {
        self.bandwidth
    }
}

pub fn pairwise_distances(points: &Matrix) -> Result<DistanceMatrix> {
    let n = points.nrows();
    if n < 2 {
        return Err(DepError::InsufficientSample { needed: 2, got: n });
    }
    check_finite(points, "points")?;
    let dim = points.ncols();
    let mut d = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j + 1..n {
            let mut ss = 0.0;
            for c in 0..dim {
                let diff = points[(i, c)] - points[(j, c)];
                ss += diff * diff;
            }
            let dist = ss.sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    Ok(DistanceMatrix(d))
}

/// Median of the strictly-upper-triangle distances.
///
/// Falls back to the smallest nonzero distance when the median is zero, and
/// to 1 when every distance is zero.
pub fn median_heuristic(d: &DistanceMatrix) -> Bandwidth {
    let mut vals = d.upper_triangle();
    if vals.is_empty() {
        return Bandwidth(1.0);
    }
    vals.sort_by(f64::total_cmp);
    let m = vals.len();
    let median = if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    };
    if median > 0.0 {
        return Bandwidth(median);
    }
    match vals.iter().find(|&&v| v > 0.0) {
        Some(&v) => Bandwidth(v),
        None => Bandwidth(1.0),
    }
}

/// `K[i,j] = exp(-D[i,j]^2 / (2 sigma^2))`.
pub fn gaussian_gram(d: &DistanceMatrix, sigma: Bandwidth) -> GramMatrix {
    let denom = 2.0 * sigma.0 * sigma.0;
    let k = d.0.map(|v| (-(v * v) / denom).exp());
    GramMatrix { k, bandwidth: Some(sigma) }
}

/// Checked variant of [`gaussian_gram`] for a raw sigma.
pub fn gaussian_gram_with(d: &DistanceMatrix, sigma: f64) -> Result<GramMatrix> {
    Ok(gaussian_gram(d, Bandwidth::new(sigma)?))
}
