//! Brute-force reference implementations shared by the integration tests.
//! These follow the literal sum definitions and share no code with the
//! library's centered-matrix evaluation.
#![allow(dead_code)]

use depstat::rng::substream;
use depstat::Matrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn row_dist(m: &Matrix, i: usize, j: usize) -> f64 {
    (0..m.ncols()).map(|c| (m[(i, c)] - m[(j, c)]).powi(2)).sum::<f64>().sqrt()
}

/// Three-sum V-statistic over an arbitrary pair of n×n "distance" arrays.
pub fn three_sum(a: &dyn Fn(usize, usize) -> f64, b: &dyn Fn(usize, usize) -> f64, n: usize) -> f64 {
    let nf = n as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for j in 0..n {
        for k in 0..n {
            s1 += a(j, k) * b(j, k);
            for r in 0..n {
                s2 += a(j, k) * b(j, r);
                for q in 0..n {
                    s3 += a(j, k) * b(q, r);
                }
            }
        }
    }
    s1 / (nf * nf) - 2.0 * s2 / nf.powi(3) + s3 / nf.powi(4)
}

pub fn dcov_oracle(x: &Matrix, y: &Matrix) -> f64 {
    three_sum(&|i, j| row_dist(x, i, j), &|i, j| row_dist(y, i, j), x.nrows())
}

pub fn hsic_sum_oracle(k: &Matrix, l: &Matrix) -> f64 {
    three_sum(&|i, j| k[(i, j)], &|i, j| l[(i, j)], k.nrows())
}

/// `tr(K H L H) / n²` with an explicit centering matrix.
pub fn hsic_trace_oracle(k: &Matrix, l: &Matrix) -> f64 {
    let n = k.nrows();
    let h = Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / n as f64);
    (k * &h * l * &h).trace() / (n * n) as f64
}

/// Distinct-index U-statistic version of the three sums.
pub fn hsic_unbiased_oracle(k: &Matrix, l: &Matrix) -> f64 {
    let n = k.nrows();
    let (mut s1, mut c1) = (0.0, 0.0);
    let (mut s2, mut c2) = (0.0, 0.0);
    let (mut s3, mut c3) = (0.0, 0.0);
    for j in 0..n {
        for kk in 0..n {
            if kk == j {
                continue;
            }
            s1 += k[(j, kk)] * l[(j, kk)];
            c1 += 1.0;
            for r in 0..n {
                if r == j || r == kk {
                    continue;
                }
                // triple (j, q=kk, r)
                s2 += k[(j, kk)] * l[(j, r)];
                c2 += 1.0;
                for q in 0..n {
                    if q == j || q == kk || q == r {
                        continue;
                    }
                    s3 += k[(j, kk)] * l[(q, r)];
                    c3 += 1.0;
                }
            }
        }
    }
    s1 / c1 - 2.0 * s2 / c2 + s3 / c3
}

pub fn gaussian_kernel_matrix(m: &Matrix, sigma: f64) -> Matrix {
    let n = m.nrows();
    Matrix::from_fn(n, n, |i, j| (-row_dist(m, i, j).powi(2) / (2.0 * sigma * sigma)).exp())
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

/// Random (x, y) with a mild dependence so statistics are not all near zero.
pub fn random_pair(seed: u64, label: &str, n: usize, p: usize, q: usize) -> (Matrix, Matrix) {
    let mut rng = substream(seed, label);
    let x = random_matrix(&mut rng, n, p);
    let noise = random_matrix(&mut rng, n, q);
    let y = Matrix::from_fn(n, q, |i, j| 0.7 * x[(i, j % p)].powi(2) + noise[(i, j)]);
    (x, y)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
