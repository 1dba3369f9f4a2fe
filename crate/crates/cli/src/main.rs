// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subset_core::error::Result;
use subset_core::simlab::{self, Experiment, ScenarioParams, ScenarioSpec};
use subset_core::{
    analysis, penalties, read_csv, DetectOptions, Detector, Error, MethodKind, ModelKind, RandomSource,
};

mod table;

#[derive(Parser)]
#[command(name = "subset", version, about = "Sparse and dense changepoint detection for multivariate series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a CSV panel and write a JSON report.
    Detect(DetectArgs),
    /// Run a simulation scenario and print per-replicate metrics.
    Simulate(SimulateArgs),
    /// Calibrate the sparse-branch penalty (or a baseline threshold) on null data.
    Calibrate(CalibrateArgs),
    /// Compare SUBSET with the CUSUM baselines on a scenario.
    Benchmark(BenchmarkArgs),
    /// Detection rate of single-change tests over a grid of magnitudes.
    Power(PowerArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// CSV with header `time,<name1>,...`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "gaussian")]
    model: ModelKind,
    /// Manual penalties; give all three to skip calibration.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "K")]
    k: Option<f64>,
    /// Target false-alarm rate for calibration.
    #[arg(long, default_value_t = 0.05)]
    fp: f64,
    #[arg(long, default_value_t = 200)]
    calib_reps: usize,
    #[arg(long, default_value_t = 1000)]
    intervals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise scale, one value or one per variate (comma separated).
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Dispersion cap for count data.
    #[arg(long, default_value_t = 10_000.0)]
    rmax: f64,
    /// JSON report path; a `<stem>_pairs.csv` is written next to it.
    /// Without it the report goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_postprocess: bool,
    /// Size and probability of the count null used in calibration; by
    /// default fitted per variate.
    #[arg(long)]
    null_r: Option<f64>,
    #[arg(long)]
    null_p: Option<f64>,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// A, B, C, D, E, Aprime, Bprime, Cprime, Dprime or amoc.
    #[arg(long)]
    scenario: String,
    /// Series length (A-E and amoc).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of variates (A-E and amoc).
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Change magnitude: mean shift, or decrease in p for counts.
    #[arg(long)]
    delta: Option<f64>,
    /// Add the up-and-back surge on the third variate (primed scenarios).
    #[arg(long)]
    surge: bool,
    /// Negative binomial size; switches primed scenarios to count data.
    #[arg(long)]
    negbin_r: Option<f64>,
    /// Fraction of variates changing (amoc).
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Change time (amoc); defaults to n/2.
    #[arg(long)]
    tau: Option<usize>,
}

impl ScenarioArgs {
    fn spec(&self) -> Result<ScenarioSpec> {
        let delta = self
            .delta
            .unwrap_or(if self.negbin_r.is_some() { 0.1 } else { 1.0 });
        simlab::named_scenario(
            &self.scenario,
            &ScenarioParams {
                n: self.n,
                d: self.d,
                delta,
                surge: self.surge,
                negbin_r: self.negbin_r,
                density: self.density,
                tau: self.tau,
            },
        )
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    fp: f64,
    #[arg(long, default_value_t = 200)]
    calib_reps: usize,
    #[arg(long, default_value_t = 1000)]
    intervals: usize,
    /// Single full-interval scan instead of binary segmentation.
    #[arg(long)]
    amoc: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "subset")]
    method: MethodKind,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.05)]
    fp: f64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Random intervals per replicate; 0 calibrates the single full scan.
    #[arg(long, default_value_t = 0)]
    intervals: usize,
    #[arg(long, default_value = "gaussian")]
    model: ModelKind,
    #[arg(long, default_value = "subset")]
    method: MethodKind,
    /// Count null parameters.
    #[arg(long, default_value_t = 20.0)]
    r: f64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Methods to compare (comma separated); baselines need Gaussian data.
    #[arg(long, value_delimiter = ',', default_value = "subset,mean,max,binweight")]
    methods: Vec<MethodKind>,
    /// Every three-change scenario at n = d = 1000 with 200 replicates.
    /// Takes hours.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long)]
    tau: Option<usize>,
    /// Grid spacing; the grid runs from `step` to 1.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 500)]
    calib_reps: usize,
    #[arg(long, default_value_t = 0.05)]
    fp: f64,
    #[arg(long, value_delimiter = ',', default_value = "subset,mean,max,binweight")]
    methods: Vec<MethodKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn pairs_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}_pairs.csv"))
}

fn detect(args: DetectArgs) -> Result<()> {
    let matrix = read_csv(&args.input)?;
    let opts = DetectOptions {
        model: args.model,
        alpha: args.alpha,
        beta: args.beta,
        k: args.k,
        target_fp: args.fp,
        calib_reps: args.calib_reps,
        intervals: args.intervals,
        seed: args.seed,
        sigma: args.sigma,
        r_max: args.rmax,
        postprocess: !args.no_postprocess,
        null_r: args.null_r,
        null_p: args.null_p,
    };
    let report = analysis::detect(&matrix, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match args.output {
        Some(path) => {
            report.write_json(&path)?;
            report.write_pairs_csv(pairs_path(&path))?;
        }
        None => println!("{}", report.to_json()?),
    }
    Ok(())
}

fn calibrated(spec: &ScenarioSpec, method: MethodKind, run: &RunArgs) -> Result<Detector> {
    simlab::calibrate_for(
        spec,
        method,
        run.fp,
        run.calib_reps,
        run.intervals,
        run.amoc,
        RandomSource::new(run.seed).derive(0),
    )
}

fn experiment(spec: &ScenarioSpec, method: MethodKind, run: &RunArgs) -> Result<Experiment> {
    let detector = calibrated(spec, method, run)?;
    simlab::run_experiment(spec, &detector, run.reps, RandomSource::new(run.seed).derive(1))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = args.scenario.spec()?;
    let exp = experiment(&spec, args.method, &args.run)?;
    let text = simlab::render_experiment(&exp);
    match args.output {
        Some(path) => subset_core::io::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let src = RandomSource::new(args.seed);
    match args.method.baseline() {
        None => {
            let null = match args.model {
                ModelKind::Gaussian => penalties::NullModel::gaussian(),
                ModelKind::Negbin => penalties::NullModel::negbin_uniform(args.d, args.r, args.p),
            };
            let pen = penalties::calibrate_beta(
                &penalties::CalibrationSpec {
                    n: args.n,
                    d: args.d,
                    null,
                    target_fp: args.fp,
                    reps: args.reps,
                    intervals: args.intervals,
                },
                src,
            )?;
            println!("alpha\tbeta\tK");
            println!("{:.6}\t{:.6}\t{:.6}", pen.alpha, pen.beta, pen.k);
        }
        Some(method) => {
            if args.model != ModelKind::Gaussian {
                return Err(Error::InvalidInput("baselines are only defined for Gaussian data".into()));
            }
            let hard = subset_core::baselines::default_hard_threshold(args.n);
            let cfg = subset_core::baselines::calibrate_threshold(
                method, hard, args.n, args.d, args.fp, args.reps, args.intervals, src,
            )?;
            println!("method\tthreshold\thard_threshold");
            println!("{}\t{:.6}\t{:.6}", method.name(), cfg.threshold, cfg.hard_threshold);
        }
    }
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let mut specs = Vec::new();
    let mut run = args.run.clone();
    if args.full {
        run.reps = 200;
        run.intervals = 1000;
        for letter in ['A', 'B', 'C', 'D', 'E'] {
            specs.push(ScenarioSpec::multi_gauss(letter, 1000, 1000, args.scenario.delta.unwrap_or(1.0))?);
        }
    } else {
        specs.push(args.scenario.spec()?);
    }
    let mut rows = Vec::new();
    for spec in &specs {
        for &method in &args.methods {
            let exp = experiment(spec, method, &run)?;
            rows.push(table::BenchmarkRow::new(&exp));
        }
    }
    print!("{}", table::render(&rows));
    Ok(())
}

fn power(args: PowerArgs) -> Result<()> {
    if !(args.step > 0.0 && args.step <= 1.0) {
        return Err(Error::InvalidInput(format!("step must lie in (0, 1], got {}", args.step)));
    }
    let steps = (1.0 / args.step).round() as usize;
    let deltas: Vec<f64> = (1..=steps).map(|k| k as f64 * args.step).collect();
    let tau = args.tau.unwrap_or(args.n / 2);
    let null = ScenarioSpec::amoc_gauss(args.n, args.d, tau, args.density, 0.0);
    null.validate()?;
    let src = RandomSource::new(args.seed);
    let mut curves = Vec::new();
    for &method in &args.methods {
        let det = simlab::calibrate_for(&null, method, args.fp, args.calib_reps, 0, true, src.derive(0))?;
        let curve = simlab::power_curve(
            |delta| ScenarioSpec::amoc_gauss(args.n, args.d, tau, args.density, delta),
            &deltas,
            &det,
            args.reps,
            src.derive(1),
        )?;
        curves.push((method, curve));
    }
    print!("{}", table::render_power(&deltas, &curves));
    Ok(())
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
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Power(a) => power(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
