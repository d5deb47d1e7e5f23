//! Power experiment over a `(θ, n, d, test)` grid.
//!
//! Every repetition of a grid point draws one dataset that all tests share,
//! so head-to-head comparisons are paired. Seeds are derived from labels
//! built from the point's coordinates, so any cell can be recomputed in
//! isolation and results do not depend on the worker count.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{generate_instance, MixConfig, SourceDensity};
use crate::error::{DepError, Result};
use crate::null::{run_test, BandwidthPolicy, NullModel, TestConfig, DEFAULT_GAMMA_PERMUTATIONS};
use crate::rng::{derive_seed, substream};
use crate::stats::StatKind;

/// A statistic paired with its null model, e.g. `hsic` or `hsic:gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TestSpec {
    pub stat: StatKind,
    pub null_model: NullModel,
}

impl TestSpec {
    pub fn permutation(stat: StatKind) -> Self {
        TestSpec { stat, null_model: NullModel::Permutation }
    }

    pub fn id(&self) -> String {
        match self.null_model {
            NullModel::Permutation => self.stat.name().to_string(),
            NullModel::Gamma => format!("{}:gamma", self.stat.name()),
        }
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for TestSpec {
    type Err = DepError;
    fn from_str(s: &str) -> Result<Self> {
        let (stat, null_model) = match s.split_once(':') {
            None => (s, NullModel::Permutation),
            Some((stat, "permutation")) => (stat, NullModel::Permutation),
            Some((stat, "gamma")) => (stat, NullModel::Gamma),
            Some((_, other)) => return Err(DepError::invalid(format!("unknown null model '{other}'"))),
        };
        Ok(TestSpec { stat: stat.parse()?, null_model })
    }
}

impl Serialize for TestSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for TestSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How source densities are chosen for each repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum DensityPolicy {
    Fixed { x: SourceDensity, y: SourceDensity },
    /// Fresh uniformly chosen pair from the catalog per repetition.
    RandomPerRepetition,
}

impl Default for DensityPolicy {
    fn default() -> Self {
        DensityPolicy::RandomPerRepetition
    }
}

fn default_gamma_permutations() -> usize {
    DEFAULT_GAMMA_PERMUTATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub thetas: Vec<f64>,
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub tests: Vec<TestSpec>,
    pub repetitions: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub base_seed: u64,
    #[serde(default)]
    pub densities: DensityPolicy,
    #[serde(default = "default_gamma_permutations")]
    pub gamma_permutations: usize,
}

/// `{k·π/32 : k = 0..8}`.
pub fn default_thetas() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * PI / 32.0).collect()
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            thetas: default_thetas(),
            ns: vec![128, 512],
            ds: vec![1, 2],
            tests: vec![TestSpec::permutation(StatKind::HsicBiased), TestSpec::permutation(StatKind::Dcov)],
            repetitions: 300,
            permutations: 200,
            alpha: 0.05,
            base_seed: 0,
            densities: DensityPolicy::default(),
            gamma_permutations: DEFAULT_GAMMA_PERMUTATIONS,
        }
    }
}

impl ExperimentGrid {
    /// Full-scale design: n up to 2048, d up to 4, 500 repetitions.
    pub fn full_scale() -> Self {
        ExperimentGrid { ns: vec![128, 512, 1024, 2048], ds: vec![1, 2, 4], repetitions: 500, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() || self.ns.is_empty() || self.ds.is_empty() || self.tests.is_empty() {
            return Err(DepError::invalid("every grid axis needs at least one value"));
        }
        if self.repetitions == 0 {
            return Err(DepError::invalid("repetitions must be at least 1"));
        }
        for p in self.points() {
            MixConfig::new(p.theta, p.d, p.n, 0).validated()?;
        }
        self.test_config(self.tests[0], 0).validate()
    }

    /// Grid points in θ-major, then n, then d order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.thetas.len() * self.ns.len() * self.ds.len());
        for &theta in &self.thetas {
            for &n in &self.ns {
                for &d in &self.ds {
                    out.push(GridPoint { theta, n, d });
                }
            }
        }
        out
    }

    fn test_config(&self, test: TestSpec, seed: u64) -> TestConfig {
        TestConfig {
            stat: test.stat,
            null_model: test.null_model,
            alpha: self.alpha,
            permutations: self.permutations,
            gamma_permutations: self.gamma_permutations,
            bandwidth: BandwidthPolicy::Median,
            seed,
        }
    }

    fn mix_config(&self, point: GridPoint, cell_seed: u64, rep: usize) -> MixConfig {
        let (density_x, density_y) = match self.densities {
            DensityPolicy::Fixed { x, y } => (x, y),
            DensityPolicy::RandomPerRepetition => {
                let mut rng = substream(cell_seed, &format!("density/{rep}"));
                let x = *SourceDensity::ALL.choose(&mut rng).expect("non-empty catalog");
                let y = *SourceDensity::ALL.choose(&mut rng).expect("non-empty catalog");
                (x, y)
            }
        };
        MixConfig {
            theta: point.theta,
            d: point.d,
            n: point.n,
            density_x,
            density_y,
            seed: derive_seed(cell_seed, &format!("data/{rep}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: f64,
    pub n: usize,
    pub d: usize,
}

impl GridPoint {
    /// Seed shared by all tests at this point.
    pub fn seed(&self, base_seed: u64) -> u64 {
        derive_seed(base_seed, &format!("cell/theta={:016x}/n={}/d={}", self.theta.to_bits(), self.n, self.d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub test: String,
    pub theta: f64,
    pub n: usize,
    pub d: usize,
    pub repetitions: usize,
    pub accept_count: usize,
    pub accept_rate: f64,
    pub seed: u64,
}

impl PowerCell {
    pub fn new(test: String, point: GridPoint, repetitions: usize, accept_count: usize, seed: u64) -> Self {
        PowerCell {
            test,
            theta: point.theta,
            n: point.n,
            d: point.d,
            repetitions,
            accept_count,
            accept_rate: accept_count as f64 / repetitions as f64,
            seed,
        }
    }

    pub fn point(&self) -> GridPoint {
        GridPoint { theta: self.theta, n: self.n, d: self.d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub test: String,
    pub theta: f64,
    pub n: usize,
    pub d: usize,
    pub repetition: usize,
    pub error: String,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cell test={} theta={} n={} d={} failed at repetition {}: {}",
            self.test, self.theta, self.n, self.d, self.repetition, self.error
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub grid: ExperimentGrid,
    pub cells: Vec<PowerCell>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl PowerReport {
    pub fn cell(&self, test: &str, point: GridPoint) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.test == test && c.point() == point)
    }
}

#[derive(Debug, Clone)]
pub struct GridFailure {
    /// Cells that completed.
    pub partial: PowerReport,
    pub failures: Vec<CellFailure>,
}

impl fmt::Display for GridFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} cell(s) failed", self.failures.len())?;
        for failure in &self.failures {
            write!(f, "\n  {failure}")?;
        }
        Ok(())
    }
}

impl std::error::Error for GridFailure {}

/// Outcome of one repetition for each test, or the first error per test.
fn run_repetition(grid: &ExperimentGrid, point: GridPoint, cell_seed: u64, rep: usize, tests: &[TestSpec]) -> Vec<Result<bool>> {
    let sample = match generate_instance(&grid.mix_config(point, cell_seed, rep)) {
        Ok(s) => s,
        Err(e) => return vec![Err(e); tests.len()],
    };
    tests
        .iter()
        .map(|&test| {
            let seed = derive_seed(cell_seed, &format!("test/{}/{rep}", test.id()));
            run_test(&sample, &grid.test_config(test, seed)).map(|r| !r.reject)
        })
        .collect()
}

fn tally(
    point: GridPoint,
    test: TestSpec,
    seed: u64,
    outcomes: impl Iterator<Item = Result<bool>>,
) -> std::result::Result<PowerCell, CellFailure> {
    let mut accepts = 0;
    let mut reps = 0;
    for (rep, outcome) in outcomes.enumerate() {
        match outcome {
            Ok(accept) => accepts += usize::from(accept),
            Err(e) => {
                return Err(CellFailure {
                    test: test.id(),
                    theta: point.theta,
                    n: point.n,
                    d: point.d,
                    repetition: rep,
                    error: e.to_string(),
                })
            }
        }
        reps += 1;
    }
    Ok(PowerCell::new(test.id(), point, reps, accepts, seed))
}

/// Acceptance rate of H₀ for one test at one grid point.
pub fn run_cell(grid: &ExperimentGrid, point: GridPoint, test: TestSpec) -> std::result::Result<PowerCell, CellFailure> {
    let seed = point.seed(grid.base_seed);
    let outcomes: Vec<Result<bool>> = (0..grid.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(grid, point, seed, rep, &[test]).remove(0))
        .collect();
    tally(point, test, seed, outcomes.into_iter())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DepError::invalid(format!("cannot build worker pool: {e}")))
}

pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> std::result::Result<PowerReport, GridFailure> {
    run_grid_with_progress(grid, workers, |_, _| {})
}

/// Runs every cell. `workers = 0` uses one worker per core. `progress` is
/// called with `(cells_done, cells_total)` after each grid point.
pub fn run_grid_with_progress<F>(grid: &ExperimentGrid, workers: usize, progress: F) -> std::result::Result<PowerReport, GridFailure>
where
    F: Fn(usize, usize) + Sync,
{
    let start = Instant::now();
    let empty = PowerReport { grid: grid.clone(), cells: Vec::new(), runtime_secs: 0.0 };
    let setup_failure = |e: DepError| GridFailure {
        partial: empty.clone(),
        failures: vec![CellFailure {
            test: String::new(),
            theta: f64::NAN,
            n: 0,
            d: 0,
            repetition: 0,
            error: e.to_string(),
        }],
    };
    grid.validate().map_err(setup_failure)?;
    let pool = pool(workers).map_err(setup_failure)?;

    let points = grid.points();
    let total = points.len() * grid.tests.len();
    let done = AtomicUsize::new(0);
    let mut cells = Vec::with_capacity(total);
    let mut failures = Vec::new();

    pool.install(|| {
        for point in &points {
            let seed = point.seed(grid.base_seed);
            let outcomes: Vec<Vec<Result<bool>>> = (0..grid.repetitions)
                .into_par_iter()
                .map(|rep| run_repetition(grid, *point, seed, rep, &grid.tests))
                .collect();
            for (t, &test) in grid.tests.iter().enumerate() {
                match tally(*point, test, seed, outcomes.iter().map(|o| o[t].clone())) {
                    Ok(cell) => cells.push(cell),
                    Err(f) => failures.push(f),
                }
            }
            let finished = done.fetch_add(grid.tests.len(), Ordering::Relaxed) + grid.tests.len();
            progress(finished, total);
        }
    });

    let report = PowerReport { grid: grid.clone(), cells, runtime_secs: start.elapsed().as_secs_f64() };
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(GridFailure { partial: report, failures })
    }
}
