//! Dependence statistics: distance covariance and correlation, biased and
//! unbiased HSIC, and Feuerverger's rank statistic.
//!
//! Every statistic is evaluated through a [`PreparedStatistic`], which holds
//! the per-sample matrices in a form where re-evaluating under a permutation
//! of the `y` rows costs a single O(n²) pass.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DepError, Result};
use crate::sample::{gaussian_gram, median_heuristic, pairwise_distances, Bandwidth, GramMatrix, Matrix, PairedSample};
use crate::scores::rank_normal_scores;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatKind {
    #[serde(rename = "dcov")]
    Dcov,
    #[serde(rename = "dcor")]
    Dcor,
    #[serde(rename = "hsic")]
    HsicBiased,
    #[serde(rename = "hsic-u")]
    HsicUnbiased,
    #[serde(rename = "feuerverger")]
    FeuervergerT1,
}

impl StatKind {
    pub const ALL: [StatKind; 5] = [
        StatKind::Dcov,
        StatKind::Dcor,
        StatKind::HsicBiased,
        StatKind::HsicUnbiased,
        StatKind::FeuervergerT1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Dcov => "dcov",
            StatKind::Dcor => "dcor",
            StatKind::HsicBiased => "hsic",
            StatKind::HsicUnbiased => "hsic-u",
            StatKind::FeuervergerT1 => "feuerverger",
        }
    }

    /// Whether the statistic uses Gaussian kernels (and hence bandwidths).
    pub fn uses_kernel(self) -> bool {
        matches!(self, StatKind::HsicBiased | StatKind::HsicUnbiased)
    }

    pub fn min_samples(self) -> usize {
        match self {
            StatKind::HsicUnbiased => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatKind {
    type Err = DepError;
    fn from_str(s: &str) -> Result<Self> {
        StatKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DepError::invalid(format!("unknown statistic '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub value: f64,
    pub kind: StatKind,
    pub n: usize,
}

/// `H M H` with `H = I - 11ᵀ/n`, for symmetric `m`.
pub fn double_center(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let nf = n as f64;
    let means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = means.iter().sum::<f64>() / nf;
    Matrix::from_fn(n, n, |i, j| m[(i, j)] - means[i] - means[j] + grand)
}

/// `Σ_ij a[i,j] · b[perm[i], perm[j]]` for symmetric `a` and `b`.
fn permuted_inner(a: &Matrix, b: &Matrix, perm: &[usize]) -> f64 {
    let n = a.nrows();
    let a = a.as_slice();
    let b = b.as_slice();
    let mut off = 0.0;
    let mut diag = 0.0;
    for (j, &pj) in perm.iter().enumerate() {
        let acol = &a[j * n..(j + 1) * n];
        let bcol = &b[pj * n..(pj + 1) * n];
        diag += acol[j] * bcol[pj];
        off += acol[..j]
            .iter()
            .zip(&perm[..j])
            .map(|(&av, &pi)| av * bcol[pi])
            .sum::<f64>();
    }
    2.0 * off + diag
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

#[derive(Debug, Clone)]
enum Form {
    /// `scale · Σ a_ij b_{πi πj}`, divided by `norm` when present.
    Centered { a: Matrix, b: Matrix, scale: f64, norm: Option<f64> },
    /// Distinct-index U-statistic on zero-diagonal kernels.
    Unbiased { k: Matrix, l: Matrix, row_k: Vec<f64>, row_l: Vec<f64>, total: f64 },
}

/// A statistic bound to one sample, ready to be evaluated on `(x, π(y))`.
#[derive(Debug, Clone)]
pub struct PreparedStatistic {
    kind: StatKind,
    n: usize,
    bandwidths: Option<(Bandwidth, Bandwidth)>,
    form: Form,
}

impl PreparedStatistic {
    /// Binds `kind` to `sample`. Kernel statistics take `bandwidths` as
    /// `(sigma_x, sigma_y)` or fall back to the per-side median heuristic.
    pub fn new(kind: StatKind, sample: &PairedSample, bandwidths: Option<(Bandwidth, Bandwidth)>) -> Result<Self> {
        let n = sample.n();
        if n < kind.min_samples() {
            return Err(DepError::InsufficientSample { needed: kind.min_samples(), got: n });
        }
        match kind {
            StatKind::Dcov | StatKind::Dcor => Self::distance(kind, sample.x(), sample.y(), 1.0),
            StatKind::FeuervergerT1 => {
                let (x, y) = univariate_scores(sample.x(), sample.y())?;
                Self::distance(kind, &x, &y, PI * PI)
            }
            StatKind::HsicBiased | StatKind::HsicUnbiased => {
                let dx = pairwise_distances(sample.x())?;
                let dy = pairwise_distances(sample.y())?;
                let (sx, sy) = bandwidths.unwrap_or_else(|| (median_heuristic(&dx), median_heuristic(&dy)));
                let k = gaussian_gram(&dx, sx);
                let l = gaussian_gram(&dy, sy);
                let mut prepared = Self::kernel(kind, &k, &l)?;
                prepared.bandwidths = Some((sx, sy));
                Ok(prepared)
            }
        }
    }

    /// Binds a kernel statistic directly to two Gram matrices.
    pub fn kernel(kind: StatKind, k: &GramMatrix, l: &GramMatrix) -> Result<Self> {
        let n = k.n();
        if l.n() != n {
            return Err(DepError::invalid(format!("gram size mismatch: {} vs {}", n, l.n())));
        }
        if n < kind.min_samples() {
            return Err(DepError::InsufficientSample { needed: kind.min_samples(), got: n });
        }
        let nf = n as f64;
        let form = match kind {
            StatKind::HsicBiased => Form::Centered {
                a: double_center(k.as_matrix()),
                b: l.as_matrix().clone(),
                scale: 1.0 / (nf * nf),
                norm: None,
            },
            StatKind::HsicUnbiased => {
                let mut k = k.as_matrix().clone();
                let mut l = l.as_matrix().clone();
                k.fill_diagonal(0.0);
                l.fill_diagonal(0.0);
                let row_k: Vec<f64> = (0..n).map(|j| k.column(j).sum()).collect();
                let row_l: Vec<f64> = (0..n).map(|j| l.column(j).sum()).collect();
                let total = row_k.iter().sum::<f64>() * row_l.iter().sum::<f64>();
                Form::Unbiased { k, l, row_k, row_l, total }
            }
            other => return Err(DepError::Unsupported(format!("{other} is not a kernel statistic"))),
        };
        Ok(PreparedStatistic { kind, n, bandwidths: k.bandwidth().zip(l.bandwidth()), form })
    }

    fn distance(kind: StatKind, x: &Matrix, y: &Matrix, factor: f64) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n {
            return Err(DepError::invalid(format!("row count mismatch: {} vs {}", n, y.nrows())));
        }
        let a = double_center(pairwise_distances(x)?.as_matrix());
        let b = double_center(pairwise_distances(y)?.as_matrix());
        let nf = n as f64;
        let scale = factor / (nf * nf);
        let norm = (kind == StatKind::Dcor).then(|| {
            let id = identity(n);
            let vxx = (scale * permuted_inner(&a, &a, &id)).max(0.0);
            let vyy = (scale * permuted_inner(&b, &b, &id)).max(0.0);
            (vxx * vyy).sqrt()
        });
        Ok(PreparedStatistic { kind, n, bandwidths: None, form: Form::Centered { a, b, scale, norm } })
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> Option<(Bandwidth, Bandwidth)> {
        self.bandwidths
    }

    /// Value on the sample as given.
    pub fn observed(&self) -> StatValue {
        self.permuted(&identity(self.n))
    }

    /// Value on `(x, y[perm])`. `perm` must be a permutation of `0..n`.
    pub fn permuted(&self, perm: &[usize]) -> StatValue {
        assert_eq!(perm.len(), self.n, "permutation length must equal n");
        let value = match &self.form {
            Form::Centered { a, b, scale, norm } => {
                let v = (scale * permuted_inner(a, b, perm)).max(0.0);
                match norm {
                    None => v,
                    Some(d) if *d > 0.0 => (v / d).min(1.0),
                    Some(_) => 0.0,
                }
            }
            Form::Unbiased { k, l, row_k, row_l, total } => {
                let nf = self.n as f64;
                let s = permuted_inner(k, l, perm);
                let r: f64 = row_k.iter().zip(perm).map(|(rk, &pi)| rk * row_l[pi]).sum();
                let pairs = s;
                let triples = r - s;
                let quads = total - 4.0 * r + 2.0 * s;
                let n2 = nf * (nf - 1.0);
                let n3 = n2 * (nf - 2.0);
                let n4 = n3 * (nf - 3.0);
                pairs / n2 - 2.0 * triples / n3 + quads / n4
            }
        };
        StatValue { value, kind: self.kind, n: self.n }
    }
}

fn univariate_scores(x: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix)> {
    if x.ncols() != 1 || y.ncols() != 1 {
        return Err(DepError::UnsupportedDimension(format!(
            "feuerverger statistic needs univariate x and y, got p = {}, q = {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let sx = rank_normal_scores(x.as_slice())?;
    let sy = rank_normal_scores(y.as_slice())?;
    Ok((Matrix::from_vec(sx.len(), 1, sx), Matrix::from_vec(sy.len(), 1, sy)))
}

fn sample(x: &Matrix, y: &Matrix) -> Result<PairedSample> {
    PairedSample::new(x.clone(), y.clone())
}

/// Squared distance covariance `V²ₙ(x, y)`.
pub fn dcov_v2(x: &Matrix, y: &Matrix) -> Result<StatValue> {
    Ok(PreparedStatistic::new(StatKind::Dcov, &sample(x, y)?, None)?.observed())
}

/// Squared distance correlation `R²ₙ(x, y)`; 0 when either marginal is constant.
pub fn dcor_r2(x: &Matrix, y: &Matrix) -> Result<StatValue> {
    Ok(PreparedStatistic::new(StatKind::Dcor, &sample(x, y)?, None)?.observed())
}

/// Biased (V-statistic) HSIC, `tr(KHLH) / n²`.
pub fn hsic_biased(k: &GramMatrix, l: &GramMatrix) -> Result<StatValue> {
    Ok(PreparedStatistic::kernel(StatKind::HsicBiased, k, l)?.observed())
}

/// Unbiased HSIC: each of the three V-statistic sums replaced by its
/// distinct-index U-statistic. Needs n >= 4 and can be negative.
pub fn hsic_unbiased(k: &GramMatrix, l: &GramMatrix) -> Result<StatValue> {
    Ok(PreparedStatistic::kernel(StatKind::HsicUnbiased, k, l)?.observed())
}

/// Feuerverger's `T⁽¹⁾ₙ`: π² times distance covariance of the rank normal scores.
pub fn feuerverger_t1(x: &Matrix, y: &Matrix) -> Result<StatValue> {
    if x.nrows() != y.nrows() {
        return Err(DepError::invalid(format!("row count mismatch: {} vs {}", x.nrows(), y.nrows())));
    }
    Ok(PreparedStatistic::new(StatKind::FeuervergerT1, &sample(x, y)?, None)?.observed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::gaussian_gram_with;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn dcov_two_points() {
        let x = col(&[0.0, 1.0]);
        let v = dcov_v2(&x, &x).unwrap();
        assert!((v.value - 0.25).abs() < 1e-15);
        assert_eq!((v.kind, v.n), (StatKind::Dcov, 2));
    }

    #[test]
    fn constant_marginal_gives_zero() {
        let c = col(&[2.0; 5]);
        let y = col(&[0.1, -3.0, 2.0, 0.7, 1.1]);
        assert_eq!(dcov_v2(&c, &y).unwrap().value, 0.0);
        assert_eq!(dcor_r2(&c, &y).unwrap().value, 0.0);
        assert_eq!(dcor_r2(&y, &c).unwrap().value, 0.0);
        assert_eq!(feuerverger_t1(&y, &c).unwrap().value, 0.0);
        let dy = pairwise_distances(&y).unwrap();
        let k = gaussian_gram_with(&pairwise_distances(&c).unwrap(), 1.0).unwrap();
        let l = gaussian_gram_with(&dy, 0.8).unwrap();
        assert_eq!(hsic_biased(&k, &l).unwrap().value, 0.0);
    }

    #[test]
    fn dcor_of_self_is_one() {
        let x = Matrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.5, 3.0, 3.0]);
        assert_eq!(dcor_r2(&x, &x).unwrap().value, 1.0);
    }

    #[test]
    fn hsic_two_points() {
        let x = col(&[0.0, 1.0]);
        let d = pairwise_distances(&x).unwrap();
        let k = gaussian_gram_with(&d, 1.0).unwrap();
        let g = (-0.5f64).exp();
        let v = hsic_biased(&k, &k).unwrap().value;
        assert!((v - (1.0 - g) * (1.0 - g) / 4.0).abs() < 1e-15);
        assert!((v - 0.038_704_53).abs() < 1e-8);
    }

    #[test]
    fn unbiased_needs_four_points() {
        let d = pairwise_distances(&col(&[0.0, 1.0, 2.0])).unwrap();
        let k = gaussian_gram_with(&d, 1.0).unwrap();
        assert_eq!(
            hsic_unbiased(&k, &k).unwrap_err(),
            DepError::InsufficientSample { needed: 4, got: 3 }
        );
    }

    #[test]
    fn unbiased_identity_pattern_is_zero() {
        let id = GramMatrix::from_matrix(Matrix::identity(6, 6)).unwrap();
        assert_eq!(hsic_unbiased(&id, &id).unwrap().value, 0.0);
    }

    #[test]
    fn feuerverger_rejects_multivariate() {
        let x = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = col(&[1.0, 2.0, 3.0]);
        assert!(matches!(feuerverger_t1(&x, &y), Err(DepError::UnsupportedDimension(_))));
    }

    #[test]
    fn gram_size_mismatch() {
        let k = GramMatrix::from_matrix(Matrix::identity(3, 3)).unwrap();
        let l = GramMatrix::from_matrix(Matrix::identity(4, 4)).unwrap();
        assert!(matches!(hsic_biased(&k, &l), Err(DepError::InvalidInput(_))));
    }

    #[test]
    fn mismatched_rows() {
        assert!(dcov_v2(&col(&[1.0, 2.0]), &col(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in StatKind::ALL {
            assert_eq!(k.name().parse::<StatKind>().unwrap(), k);
        }
        assert!("nope".parse::<StatKind>().is_err());
    }
}
