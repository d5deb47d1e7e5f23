//! `depstat`: independence tests, benchmark data and power experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use depstat::bench::{generate_instance, MixConfig, SourceDensity};
use depstat::experiment::{run_grid_with_progress, DensityPolicy, ExperimentGrid, TestSpec};
use depstat::null::{run_test, BandwidthPolicy, NullModel, TestConfig, DEFAULT_GAMMA_PERMUTATIONS};
use depstat::report::{emit_report, read_dataset, write_dataset, ReportFormat};
use depstat::{Bandwidth, DepError, StatKind};

#[derive(Debug, Parser)]
#[command(name = "depstat", version, about = "Distance covariance, HSIC and rank-score independence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an independence test on a dataset CSV (header x1..xp,y1..yq).
    Test(TestArgs),
    /// Generate a rotation-mixing benchmark dataset.
    Gen(GenArgs),
    /// Run a power experiment over a (theta, n, d, test) grid.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NullArg {
    Permutation,
    Gamma,
}

#[derive(Debug, clap::Args)]
struct TestArgs {
    file: PathBuf,
    #[arg(long, default_value = "hsic", value_parser = parse_stat)]
    stat: StatKind,
    #[arg(long = "null", value_enum, default_value = "permutation")]
    null_model: NullArg,
    #[arg(long, default_value_t = 200)]
    perms: usize,
    /// Permutations used to fit the Gamma null.
    #[arg(long, default_value_t = DEFAULT_GAMMA_PERMUTATIONS)]
    gamma_perms: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// `median` or `fixed:SX,SY`.
    #[arg(long, default_value = "median", value_parser = parse_bandwidth)]
    bandwidth: BandwidthPolicy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for permutations; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, clap::Args)]
struct GenArgs {
    /// Rotation angle in [0, pi/4]; `pi/K` is accepted.
    #[arg(long, value_parser = parse_theta)]
    theta: f64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "two-gaussian-mix", value_parser = parse_density)]
    density_x: SourceDensity,
    #[arg(long, default_value = "two-gaussian-mix", value_parser = parse_density)]
    density_y: SourceDensity,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for symmetry with the other subcommands; generation is sequential.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct PowerArgs {
    /// JSON experiment grid; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated angles; `pi/K` is accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_theta)]
    thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ds: Option<Vec<usize>>,
    /// Comma-separated test ids, e.g. `hsic,dcov,hsic:gamma`.
    #[arg(long, value_delimiter = ',', value_parser = parse_test)]
    tests: Option<Vec<TestSpec>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `random` (fresh pair per repetition) or `fixed:X,Y` with catalog names.
    #[arg(long, value_parser = parse_densities)]
    densities: Option<DensityPolicy>,
    /// Use the full-scale design (n up to 2048, d up to 4, 500 repetitions) as the base grid.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn parse_stat(s: &str) -> Result<StatKind, String> {
    s.parse().map_err(|e: DepError| e.to_string())
}

fn parse_density(s: &str) -> Result<SourceDensity, String> {
    s.parse().map_err(|e: DepError| e.to_string())
}

fn parse_densities(s: &str) -> Result<DensityPolicy, String> {
    if s == "random" {
        return Ok(DensityPolicy::RandomPerRepetition);
    }
    let fixed = s.strip_prefix("fixed:").ok_or_else(|| format!("expected 'random' or 'fixed:X,Y', got '{s}'"))?;
    let (x, y) = fixed.split_once(',').ok_or_else(|| format!("expected 'fixed:X,Y', got '{s}'"))?;
    Ok(DensityPolicy::Fixed { x: parse_density(x)?, y: parse_density(y)? })
}

fn parse_test(s: &str) -> Result<TestSpec, String> {
    s.parse().map_err(|e: DepError| e.to_string())
}

fn parse_theta(s: &str) -> Result<f64, String> {
    if let Some(k) = s.strip_prefix("pi/") {
        let k: f64 = k.parse().map_err(|_| format!("bad angle '{s}'"))?;
        return Ok(std::f64::consts::PI / k);
    }
    s.parse().map_err(|_| format!("bad angle '{s}'"))
}

fn parse_bandwidth(s: &str) -> Result<BandwidthPolicy, String> {
    if s == "median" {
        return Ok(BandwidthPolicy::Median);
    }
    let fixed = s.strip_prefix("fixed:").ok_or_else(|| format!("expected 'median' or 'fixed:SX,SY', got '{s}'"))?;
    let (sx, sy) = fixed.split_once(',').ok_or_else(|| format!("expected 'fixed:SX,SY', got '{s}'"))?;
    let sigma = |v: &str| -> Result<Bandwidth, String> {
        let v: f64 = v.trim().parse().map_err(|_| format!("bad bandwidth '{v}'"))?;
        Bandwidth::new(v).map_err(|e| e.to_string())
    };
    Ok(BandwidthPolicy::Fixed { sigma_x: sigma(sx)?, sigma_y: sigma(sy)? })
}

enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Usage(m) => (1, m),
            Failure::Data(m) => (2, m),
            Failure::Runtime(m) => (3, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

fn log_config<T: Serialize>(config: &T) {
    let line = serde_json::json!({ "resolved_config": config });
    eprintln!("{line}");
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

#[derive(Serialize)]
struct TestOutput {
    statistic: f64,
    stat_kind: StatKind,
    threshold: f64,
    p_value: f64,
    reject: bool,
    n: usize,
    p: usize,
    q: usize,
    seed: u64,
    null_model: NullModel,
    bandwidth_x: Option<f64>,
    bandwidth_y: Option<f64>,
}

fn cmd_test(args: TestArgs) -> Result<(), Failure> {
    let config = TestConfig {
        stat: args.stat,
        null_model: match args.null_model {
            NullArg::Permutation => NullModel::Permutation,
            NullArg::Gamma => NullModel::Gamma,
        },
        alpha: args.alpha,
        permutations: args.perms,
        gamma_permutations: args.gamma_perms,
        bandwidth: args.bandwidth,
        seed: args.seed,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    log_config(&serde_json::json!({ "file": args.file, "test": config, "workers": args.workers }));

    let file = File::open(&args.file).map_err(|e| Failure::Data(format!("cannot open {}: {e}", args.file.display())))?;
    let sample = read_dataset(BufReader::new(file)).map_err(|e| Failure::Data(format!("{}: {e}", args.file.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let result = pool.install(|| run_test(&sample, &config)).map_err(|e| match e {
        DepError::UnsupportedDimension(_) | DepError::InsufficientSample { .. } | DepError::InvalidInput(_) => {
            Failure::Data(e.to_string())
        }
        other => Failure::Runtime(other.to_string()),
    })?;

    let output = TestOutput {
        statistic: result.statistic.value,
        stat_kind: result.statistic.kind,
        threshold: result.threshold,
        p_value: result.p_value,
        reject: result.reject,
        n: sample.n(),
        p: sample.p(),
        q: sample.q(),
        seed: config.seed,
        null_model: config.null_model,
        bandwidth_x: result.bandwidths.map(|b| b.0.sigma()),
        bandwidth_y: result.bandwidths.map(|b| b.1.sigma()),
    };
    let text = serde_json::to_string(&output).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let config = MixConfig {
        theta: args.theta,
        d: args.d,
        n: args.n,
        density_x: args.density_x,
        density_y: args.density_y,
        seed: args.seed,
    }
    .validated()
    .map_err(|e| Failure::Usage(e.to_string()))?;
    log_config(&serde_json::json!({ "out": args.out, "mix": config, "workers": args.workers }));
    let sample = generate_instance(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    let written = match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_dataset(&sample, &mut w).and_then(|_| w.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_dataset(&sample, &mut w).and_then(|_| w.flush())
        }
    };
    written.map_err(|e| Failure::Runtime(format!("write failed: {e}")))
}

fn resolve_grid(args: &PowerArgs) -> Result<ExperimentGrid, Failure> {
    let mut grid = match &args.config {
        Some(path) => {
            let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None if args.full => ExperimentGrid::full_scale(),
        None => ExperimentGrid::default(),
    };
    if let Some(v) = &args.thetas {
        grid.thetas = v.clone();
    }
    if let Some(v) = &args.ns {
        grid.ns = v.clone();
    }
    if let Some(v) = &args.ds {
        grid.ds = v.clone();
    }
    if let Some(v) = &args.tests {
        grid.tests = v.clone();
    }
    if let Some(v) = args.reps {
        grid.repetitions = v;
    }
    if let Some(v) = args.perms {
        grid.permutations = v;
    }
    if let Some(v) = args.alpha {
        grid.alpha = v;
    }
    if let Some(v) = args.seed {
        grid.base_seed = v;
    }
    if let Some(v) = args.densities {
        grid.densities = v;
    }
    grid.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(grid)
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

fn cmd_power(args: PowerArgs) -> Result<(), Failure> {
    let grid = resolve_grid(&args)?;
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    log_config(&serde_json::json!({ "grid": grid, "out": args.out, "format": format, "workers": args.workers }));

    let outcome = run_grid_with_progress(&grid, args.workers, |done, total| {
        eprintln!("progress: {done}/{total} cells");
    });
    let (report, path, failure) = match outcome {
        Ok(report) => (report, args.out.clone(), None),
        Err(err) => {
            let msg = err.to_string();
            (err.partial, partial_path(&args.out), Some(msg))
        }
    };
    let mut w = create(&path)?;
    emit_report(&report, format, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::Runtime(format!("write failed: {e}")))?;
    eprintln!("runtime: {:.3} s", report.runtime_secs);
    match failure {
        None => Ok(()),
        Some(msg) => Err(Failure::Runtime(format!("{msg}\npartial results written to {}", path.display()))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Power(args) => cmd_power(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
