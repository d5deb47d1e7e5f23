//! Seeded Monte Carlo checks of test calibration and of the benchmark
//! generator's dependence structure.

use std::f64::consts::FRAC_PI_4;

use depstat::bench::{generate_instance, sample_source, MixConfig, SourceDensity};
use depstat::null::{permutation_null, permutation_test, TestConfig};
use depstat::rng::substream;
use depstat::stats::PreparedStatistic;
use depstat::{PairedSample, StatKind};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Central 99% interval of Binomial(reps, p) as counts.
fn binomial_99(reps: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, reps).unwrap();
    let lo = (0..=reps).find(|&k| b.cdf(k) > 0.005).unwrap();
    let hi = (0..=reps).find(|&k| b.cdf(k) >= 0.995).unwrap();
    (lo, hi)
}

fn gaussian_pair(n: usize, seed: u64) -> PairedSample {
    let mut rng = substream(seed, "gauss");
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    PairedSample::from_columns(&x, &y).unwrap()
}

fn correlation(s: &PairedSample) -> f64 {
    let x = s.x().as_slice();
    let y = s.y().as_slice();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn hsic_null_quantile_is_calibrated_at_n500() {
    let below = (0..300u64)
        .into_par_iter()
        .filter(|&r| {
            let s = gaussian_pair(500, r);
            let cfg = TestConfig { seed: r, ..TestConfig::new(StatKind::HsicBiased) };
            let observed = PreparedStatistic::new(cfg.stat, &s, None).unwrap().observed().value;
            observed <= permutation_null(&s, &cfg).unwrap().threshold()
        })
        .count();
    let rate = below as f64 / 300.0;
    assert!((rate - 0.95).abs() <= 0.03, "rate {rate}");
}

#[test]
fn rejection_rate_within_binomial_interval_for_every_statistic() {
    let reps = 300u64;
    let (lo, hi) = binomial_99(reps, 0.05);
    for stat in StatKind::ALL {
        let rejections = (0..reps)
            .into_par_iter()
            .filter(|&r| {
                let s = generate_instance(&MixConfig::new(0.0, 1, 128, 1000 + r)).unwrap();
                let cfg = TestConfig { seed: r, ..TestConfig::new(stat) };
                permutation_test(&s, &cfg).unwrap().reject
            })
            .count() as u64;
        assert!((lo..=hi).contains(&rejections), "{stat}: {rejections} not in [{lo}, {hi}]");
    }
}

#[test]
fn rotated_sources_are_dependent_but_uncorrelated() {
    let rejections = (0..100u64)
        .into_par_iter()
        .filter(|&r| {
            let s = generate_instance(&MixConfig::new(FRAC_PI_4, 1, 2048, r)).unwrap();
            let rho = correlation(&s);
            assert!(rho.abs() < 0.08, "run {r}: correlation {rho}");
            permutation_test(&s, &TestConfig { seed: r, ..TestConfig::new(StatKind::HsicBiased) }).unwrap().reject
        })
        .count();
    assert!(rejections >= 95, "{rejections}/100");
}

fn independence_smoke(n: usize) {
    let accepts = (0..100u64)
        .into_par_iter()
        .filter(|&r| {
            let s = generate_instance(&MixConfig::new(0.0, 2, n, 500 + r)).unwrap();
            !permutation_test(&s, &TestConfig { seed: r, ..TestConfig::new(StatKind::HsicBiased) }).unwrap().reject
        })
        .count();
    assert!(accepts >= 90, "{accepts}/100");
}

#[test]
fn padded_mixing_preserves_independence() {
    independence_smoke(1024);
}

/// Same check at n = 10⁴ (two 800 MB Gram matrices per run; hours on one core).
#[test]
#[ignore]
fn padded_mixing_preserves_independence_large() {
    independence_smoke(10_000);
}

#[test]
fn every_density_pair_is_uncorrelated_after_rotation() {
    for dx in SourceDensity::ALL {
        for dy in SourceDensity::ALL {
            let cfg = MixConfig { density_x: dx, density_y: dy, ..MixConfig::new(FRAC_PI_4, 1, 20_000, 3) };
            let rho = correlation(&generate_instance(&cfg).unwrap());
            assert!(rho.abs() < 0.04, "{dx}/{dy}: {rho}");
        }
    }
}

#[test]
fn source_moments_converge_at_root_n() {
    // error of the sample mean shrinks about tenfold from n = 10³ to 10⁵
    for density in SourceDensity::ALL {
        let rms = |n: usize| {
            let sq: f64 = (0..40u64)
                .map(|r| {
                    let v = sample_source(density, n, &mut substream(r, density.name()));
                    (v.iter().sum::<f64>() / n as f64).powi(2)
                })
                .sum();
            (sq / 40.0).sqrt()
        };
        let ratio = rms(1_000) / rms(100_000);
        assert!((4.0..25.0).contains(&ratio), "{density}: ratio {ratio}");
    }
}
