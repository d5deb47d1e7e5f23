//! Hypothesis tests built on a statistic: permutation null and a two-moment
//! Gamma approximation of it.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{DepError, Result};
use crate::rng::substream;
use crate::sample::{Bandwidth, PairedSample};
use crate::stats::{PreparedStatistic, StatKind, StatValue};

/// Permuted statistics used to fit the Gamma approximation by default.
pub const DEFAULT_GAMMA_PERMUTATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullModel {
    Permutation,
    Gamma,
}

impl NullModel {
    pub fn name(self) -> &'static str {
        match self {
            NullModel::Permutation => "permutation",
            NullModel::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthPolicy {
    Median,
    Fixed { sigma_x: Bandwidth, sigma_y: Bandwidth },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub stat: StatKind,
    pub null_model: NullModel,
    pub alpha: f64,
    /// Permutations `B` for the permutation null.
    pub permutations: usize,
    /// Permutations `B₀` feeding the Gamma moment fit.
    pub gamma_permutations: usize,
    pub bandwidth: BandwidthPolicy,
    pub seed: u64,
}

impl TestConfig {
    pub fn new(stat: StatKind) -> Self {
        TestConfig {
            stat,
            null_model: NullModel::Permutation,
            alpha: 0.05,
            permutations: 200,
            gamma_permutations: DEFAULT_GAMMA_PERMUTATIONS,
            bandwidth: BandwidthPolicy::Median,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DepError::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.permutations == 0 || self.gamma_permutations == 0 {
            return Err(DepError::invalid("permutation count must be at least 1"));
        }
        Ok(())
    }

    fn fixed_bandwidths(&self) -> Option<(Bandwidth, Bandwidth)> {
        match self.bandwidth {
            BandwidthPolicy::Median => None,
            BandwidthPolicy::Fixed { sigma_x, sigma_y } => Some((sigma_x, sigma_y)),
        }
    }
}

/// Source of the permutations applied to `y`.
pub trait Permuter: Sync {
    /// Permutation number `index` of `0..n`.
    fn permutation(&self, index: usize, n: usize) -> Vec<usize>;
}

/// Uniform permutations, each drawn from its own `(seed, "perm-<index>")` substream.
#[derive(Debug, Clone, Copy)]
pub struct SeededPermuter {
    pub seed: u64,
}

impl Permuter for SeededPermuter {
    fn permutation(&self, index: usize, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut substream(self.seed, &format!("perm-{index}")));
        perm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum NullEstimate {
    Permutation { values: Vec<f64>, threshold: f64 },
    Gamma { shape: f64, scale: f64, threshold: f64 },
}

impl NullEstimate {
    pub fn threshold(&self) -> f64 {
        match self {
            NullEstimate::Permutation { threshold, .. } | NullEstimate::Gamma { threshold, .. } => *threshold,
        }
    }

    /// p-value of `observed` under this null. Permutation p-values use
    /// `(1 + #{null >= observed}) / (B + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        match self {
            NullEstimate::Permutation { values, .. } => {
                let exceed = values.iter().filter(|&&v| v >= observed).count();
                (1 + exceed) as f64 / (values.len() + 1) as f64
            }
            NullEstimate::Gamma { shape, scale, .. } => GammaFit { shape: *shape, scale: *scale }.upper_tail(observed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: StatValue,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub null: NullEstimate,
    pub bandwidths: Option<(Bandwidth, Bandwidth)>,
    pub config: TestConfig,
}

/// Order-statistic quantile: element `⌈q·B⌉ − 1` of the sorted values.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(DepError::invalid("quantile of an empty sequence"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(DepError::invalid(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    // 1e-9 absorbs representation error, e.g. (1 - 0.05) * 100
    let rank = (q * b as f64 - 1e-9).ceil() as isize - 1;
    Ok(sorted[rank.clamp(0, b as isize - 1) as usize])
}

fn prepare(sample: &PairedSample, config: &TestConfig) -> Result<PreparedStatistic> {
    config.validate()?;
    if config.stat == StatKind::FeuervergerT1 && (sample.p() != 1 || sample.q() != 1) {
        return Err(DepError::UnsupportedDimension(format!(
            "feuerverger statistic needs p = q = 1, got p = {}, q = {}",
            sample.p(),
            sample.q()
        )));
    }
    PreparedStatistic::new(config.stat, sample, config.fixed_bandwidths())
}

fn permuted_values(stat: &PreparedStatistic, count: usize, permuter: &dyn Permuter) -> Vec<f64> {
    let n = stat.n();
    (0..count)
        .into_par_iter()
        .map(|b| stat.permuted(&permuter.permutation(b, n)).value)
        .collect()
}

/// Permutation null with an explicit permutation source.
pub fn permutation_null_with(
    sample: &PairedSample,
    config: &TestConfig,
    permuter: &dyn Permuter,
) -> Result<NullEstimate> {
    let stat = prepare(sample, config)?;
    permutation_null_prepared(&stat, config, permuter)
}

fn permutation_null_prepared(
    stat: &PreparedStatistic,
    config: &TestConfig,
    permuter: &dyn Permuter,
) -> Result<NullEstimate> {
    let values = permuted_values(stat, config.permutations, permuter);
    let threshold = empirical_quantile(&values, 1.0 - config.alpha)?;
    Ok(NullEstimate::Permutation { values, threshold })
}

/// `B` statistics on `(x, π(y))`; bandwidths come from the unpermuted marginals.
pub fn permutation_null(sample: &PairedSample, config: &TestConfig) -> Result<NullEstimate> {
    permutation_null_with(sample, config, &SeededPermuter { seed: config.seed })
}

pub fn permutation_test_with(sample: &PairedSample, config: &TestConfig, permuter: &dyn Permuter) -> Result<TestResult> {
    let stat = prepare(sample, config)?;
    let observed = stat.observed();
    let null = permutation_null_prepared(&stat, config, permuter)?;
    Ok(decide(observed, null, stat.bandwidths(), config))
}

pub fn permutation_test(sample: &PairedSample, config: &TestConfig) -> Result<TestResult> {
    permutation_test_with(sample, config, &SeededPermuter { seed: config.seed })
}

/// Gamma law fitted by matching mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
}

impl GammaFit {
    /// `shape = m²/v`, `scale = v/m` from the sample mean and (n − 1) variance.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(DepError::InsufficientSample { needed: 2, got: values.len() });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Self::from_moments(mean, variance)
    }

    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
            return Err(DepError::DegenerateNull { mean, variance });
        }
        Ok(GammaFit { shape: mean * mean / variance, scale: variance / mean })
    }

    fn dist(&self) -> Gamma {
        Gamma::new(self.shape, 1.0 / self.scale).expect("positive gamma parameters")
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.dist().inverse_cdf(p)
    }

    pub fn upper_tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            self.dist().sf(x)
        }
    }
}

/// Test with a Gamma null fitted to `B₀` permuted statistics. Biased HSIC only.
pub fn gamma_test_with(sample: &PairedSample, config: &TestConfig, permuter: &dyn Permuter) -> Result<TestResult> {
    if config.stat != StatKind::HsicBiased {
        return Err(DepError::Unsupported(format!(
            "gamma null approximation is only defined for hsic, not {}",
            config.stat
        )));
    }
    let stat = prepare(sample, config)?;
    let observed = stat.observed();
    let values = permuted_values(&stat, config.gamma_permutations, permuter);
    let fit = GammaFit::from_values(&values)?;
    let null = NullEstimate::Gamma {
        shape: fit.shape,
        scale: fit.scale,
        threshold: fit.quantile(1.0 - config.alpha),
    };
    Ok(decide(observed, null, stat.bandwidths(), config))
}

pub fn gamma_test(sample: &PairedSample, config: &TestConfig) -> Result<TestResult> {
    gamma_test_with(sample, config, &SeededPermuter { seed: config.seed })
}

/// Dispatches on `config.null_model`.
pub fn run_test(sample: &PairedSample, config: &TestConfig) -> Result<TestResult> {
    match config.null_model {
        NullModel::Permutation => permutation_test(sample, config),
        NullModel::Gamma => gamma_test(sample, config),
    }
}

fn decide(
    statistic: StatValue,
    null: NullEstimate,
    bandwidths: Option<(Bandwidth, Bandwidth)>,
    config: &TestConfig,
) -> TestResult {
    let threshold = null.threshold();
    TestResult {
        statistic,
        threshold,
        p_value: null.p_value(statistic.value),
        reject: statistic.value > threshold,
        null,
        bandwidths,
        config: config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    struct IdentityPermuter;

    impl Permuter for IdentityPermuter {
        fn permutation(&self, _index: usize, n: usize) -> Vec<usize> {
            (0..n).collect()
        }
    }

    fn gaussian_sample(n: usize, seed: u64) -> PairedSample {
        let mut rng = substream(seed, "test-data");
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        PairedSample::from_columns(&x, &y).unwrap()
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.95).unwrap(), 95.0);
        assert_eq!(empirical_quantile(&v, 1.0 - 0.05).unwrap(), 95.0);
        assert_eq!(empirical_quantile(&[4.2], 0.3).unwrap(), 4.2);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0], 0.01).unwrap(), 1.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn identity_permutation_reproduces_observed() {
        let s = gaussian_sample(30, 1);
        for stat in StatKind::ALL {
            let mut cfg = TestConfig::new(stat);
            cfg.permutations = 1;
            let res = permutation_test_with(&s, &cfg, &IdentityPermuter).unwrap();
            let NullEstimate::Permutation { values, .. } = &res.null else { panic!() };
            assert_eq!(values, &vec![res.statistic.value]);
            assert_eq!(res.p_value, 1.0);
            assert!(!res.reject);
        }
    }

    #[test]
    fn seeded_null_is_reproducible() {
        let s = gaussian_sample(40, 2);
        let mut cfg = TestConfig::new(StatKind::HsicBiased);
        cfg.seed = 99;
        let a = permutation_null(&s, &cfg).unwrap();
        let b = permutation_null(&s, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 100;
        assert_ne!(a, permutation_null(&s, &cfg).unwrap());
    }

    #[test]
    fn p_value_counting() {
        let values: Vec<f64> = (0..200).map(|i| i as f64 / 1000.0).collect();
        let null = NullEstimate::Permutation { threshold: empirical_quantile(&values, 0.95).unwrap(), values };
        assert!((null.p_value(10.0) - 1.0 / 201.0).abs() < 1e-15);
        assert!(10.0 > null.threshold());
        assert_eq!(null.p_value(-1.0), 1.0);

        let tied = NullEstimate::Permutation { values: vec![0.5; 200], threshold: 0.5 };
        assert_eq!(tied.p_value(0.5), 1.0);
        assert!(!(0.5 > tied.threshold()));
    }

    #[test]
    fn p_value_monotone_in_observed() {
        let mut rng = substream(5, "mono");
        let values: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let null = NullEstimate::Permutation { threshold: empirical_quantile(&values, 0.9).unwrap(), values };
        let mut prev = 1.0;
        for i in 0..=120 {
            let p = null.p_value(i as f64 / 100.0);
            assert!(p <= prev);
            assert!(p >= 1.0 / 51.0);
            prev = p;
        }
        let g = NullEstimate::Gamma { shape: 2.0, scale: 0.5, threshold: 2.0 };
        let mut prev = 1.0;
        for i in 0..=100 {
            let p = g.p_value(i as f64 / 10.0);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn gamma_recovers_parameters() {
        let dist = rand_distr::Gamma::new(2.0, 3.0).unwrap();
        let mut rng = substream(11, "gamma-fit");
        let values: Vec<f64> = (0..5000).map(|_| dist.sample(&mut rng)).collect();
        let fit = GammaFit::from_values(&values).unwrap();
        assert!((fit.shape - 2.0).abs() < 0.15 * 2.0, "{fit:?}");
        assert!((fit.scale - 3.0).abs() < 0.15 * 3.0, "{fit:?}");
    }

    #[test]
    fn gamma_exponential_special_case() {
        // mean 1, unbiased variance 1 -> shape 1, scale 1
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let fit = GammaFit::from_values(&[1.0 - a, 1.0 + a]).unwrap();
        assert!((fit.shape - 1.0).abs() < 1e-12 && (fit.scale - 1.0).abs() < 1e-12);
        for alpha in [0.01, 0.05, 0.1] {
            assert!((fit.quantile(1.0 - alpha) + alpha.ln()).abs() < 1e-6);
        }
        let fit = GammaFit::from_moments(3.0, 9.0).unwrap();
        assert!((fit.quantile(0.95) + 3.0 * 0.05f64.ln()).abs() < 1e-6);
        assert!((fit.upper_tail(-3.0 * 0.05f64.ln()) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn gamma_errors() {
        assert!(matches!(GammaFit::from_values(&[1.0, 1.0, 1.0]), Err(DepError::DegenerateNull { .. })));
        let s = gaussian_sample(20, 3);
        let cfg = TestConfig { null_model: NullModel::Gamma, ..TestConfig::new(StatKind::Dcov) };
        assert!(matches!(run_test(&s, &cfg), Err(DepError::Unsupported(_))));
        let c = PairedSample::from_columns(&[1.0; 10], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        let cfg = TestConfig { null_model: NullModel::Gamma, ..TestConfig::new(StatKind::HsicBiased) };
        assert!(matches!(run_test(&c, &cfg), Err(DepError::DegenerateNull { .. })));
    }

    #[test]
    fn feuerverger_dimension_check() {
        let x = crate::sample::Matrix::from_fn(10, 2, |i, j| (i * 3 + j) as f64);
        let y = crate::sample::Matrix::from_fn(10, 1, |i, _| (i * i) as f64);
        let s = PairedSample::new(x, y).unwrap();
        let cfg = TestConfig::new(StatKind::FeuervergerT1);
        assert!(matches!(permutation_null(&s, &cfg), Err(DepError::UnsupportedDimension(_))));
    }

    #[test]
    fn config_validation() {
        let s = gaussian_sample(10, 4);
        let mut cfg = TestConfig::new(StatKind::Dcov);
        cfg.alpha = 1.0;
        assert!(run_test(&s, &cfg).is_err());
        cfg.alpha = 0.05;
        cfg.permutations = 0;
        assert!(run_test(&s, &cfg).is_err());
    }

    #[test]
    fn bandwidths_fixed_across_permutations() {
        let s = gaussian_sample(25, 6);
        let cfg = TestConfig::new(StatKind::HsicBiased);
        let res = permutation_test(&s, &cfg).unwrap();
        let (sx, sy) = res.bandwidths.unwrap();
        let fixed = TestConfig { bandwidth: BandwidthPolicy::Fixed { sigma_x: sx, sigma_y: sy }, ..cfg };
        let res2 = permutation_test(&s, &fixed).unwrap();
        assert_eq!(res.null, res2.null);
        assert_eq!(res.statistic, res2.statistic);
    }
}
