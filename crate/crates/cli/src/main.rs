//! Command-line front end: scenario runs, tail-bound computations, and
//! growth-rate diagnostics over previously emitted CSV files.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use seqalloc::bounds::{
    self, chernoff_rho_normal, chernoff_rho_numeric, incorrect_inference_bound,
    moment_stability, stopping_time_batch, ShiftedModel, TailBound,
};
use seqalloc::montecarlo::{log_slope, FLAT_SLOPE_THRESHOLD};
use seqalloc::response::ResponseModel;
use seqalloc::scenario::{self, ScenarioSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "seqalloc", version, about = "Adaptive sequential allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a preset or a TOML config) and emit its table.
    Run(RunArgs),
    /// Tail-bound and stopping-time computations.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Growth-rate diagnostics over a directory of scenario CSV files.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    /// Compiled-in scenario name; `--preset list` prints the catalogue.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Path to a scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; fixed seed, fixed output, byte for byte.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the scenario's replication count.
    #[arg(long)]
    reps: Option<u64>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Closed-form geometric rate exp(-u^2/2) for a standard normal stream.
    RhoNormal {
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
    },
    /// Numeric geometric rate by mgf minimization.
    Rho {
        /// Drift subtracted from the centered stream.
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
        /// Success probability; selects a centered Bernoulli base instead of
        /// the standard normal.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Geometric survival envelope min(1, c rho^k / (1 - rho)) at each k.
    Tail {
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, required = true, num_args = 1..)]
        k: Vec<u64>,
    },
    /// Wrong-decision bound Phi(-(delta + eps) sqrt(m)).
    Inference {
        /// True gap between the two leading means.
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eps: f64,
        /// Balanced initial draws per arm.
        #[arg(long)]
        m: u64,
    },
    /// Simulate truncated lock-in times and report mean, tail, and envelope.
    Oracle {
        #[arg(long)]
        u: f64,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Truncation horizon; derived from the rate when omitted.
        #[arg(long)]
        horizon: Option<u64>,
        /// First tail index for the envelope fit.
        #[arg(long, default_value_t = 20)]
        k0: u64,
    },
    /// Moment estimates of the lock-in time at two horizons.
    Moments {
        #[arg(long)]
        u: f64,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        h1: u64,
        #[arg(long)]
        h2: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        orders: Vec<u32>,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Directory of CSV files previously written by `run --format csv`.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run_scenario(args),
        Command::Bounds(cmd) => run_bounds(cmd),
        Command::Diagnose(args) => run_diagnose(args),
    }
}

fn run_scenario(args: RunArgs) -> Result<()> {
    if args.preset.as_deref() == Some("list") {
        for name in scenario::preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let mut spec: ScenarioSpec = match (&args.preset, &args.config) {
        (Some(name), None) => scenario::preset(name)?,
        (None, Some(path)) => scenario::load_config(path)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    if let Some(reps) = args.reps {
        spec.reps = reps;
        spec.validate()?;
    }
    let table = scenario::run_scenario(&spec, args.seed)?;
    let rendered = match args.format {
        Format::Csv => table.to_csv()?,
        Format::Text => table.to_text(),
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn shifted_model(u: f64, p: Option<f64>) -> Result<ShiftedModel> {
    let base = match p {
        Some(p) => ResponseModel::bernoulli(p)?,
        None => ResponseModel::normal(0.0, 1.0)?,
    };
    Ok(ShiftedModel::new(base, u)?)
}

fn run_bounds(cmd: BoundsCommand) -> Result<()> {
    match cmd {
        BoundsCommand::RhoNormal { u } => {
            println!("{:.12}", chernoff_rho_normal(u)?);
        }
        BoundsCommand::Rho { u, p } => {
            println!("{:.12}", chernoff_rho_numeric(&shifted_model(u, p)?)?);
        }
        BoundsCommand::Tail { rho, c, k } => {
            let tb = TailBound::new(rho, c, 1)?;
            for k in k {
                println!("{k}\t{:.6e}", tb.survival_bound(k));
            }
        }
        BoundsCommand::Inference { delta, eps, m } => {
            println!("{:.6e}", incorrect_inference_bound(delta, eps, m)?);
        }
        BoundsCommand::Oracle {
            u,
            p,
            runs,
            seed,
            horizon,
            k0,
        } => {
            let model = shifted_model(u, p)?;
            let rho = chernoff_rho_numeric(&model)?;
            let horizon = match horizon {
                Some(h) => h,
                // Pilot constant 1: refined below once the sample is in.
                None => TailBound::horizon_for(rho, 1.0, 1e-6)?,
            };
            let times = stopping_time_batch(&model, horizon, runs, seed)?;
            let censored = times.iter().filter(|t| t.censored).count();
            let values: Vec<u64> = times.iter().map(|t| t.value).collect();
            let mean = values.iter().sum::<u64>() as f64 / runs as f64;
            let max = values.iter().max().copied().unwrap_or(0);
            println!("rate rho          {rho:.12}");
            println!("horizon           {horizon}");
            println!("runs              {runs}");
            println!("censored          {censored}");
            println!("mean lock-in      {mean:.4}");
            println!("max lock-in       {max}");
            match TailBound::fit_constant(&values, rho, k0) {
                Some(c) => {
                    println!("fitted c (k0={k0})  {c:.6}");
                    let tb = TailBound::new(rho, c, horizon)?;
                    let surv = bounds::empirical_survival(&values);
                    let within = surv
                        .iter()
                        .enumerate()
                        .skip(k0 as usize)
                        .all(|(k, s)| *s <= tb.survival_bound(k as u64) + 1e-12);
                    println!("envelope holds    {within}");
                }
                None => println!("fitted c (k0={k0})  n/a (no tail mass beyond k0)"),
            }
        }
        BoundsCommand::Moments {
            u,
            p,
            h1,
            h2,
            orders,
            runs,
            seed,
        } => {
            let model = shifted_model(u, p)?;
            let report = moment_stability(&model, &orders, (h1, h2), runs, seed)?;
            println!(
                "runs {runs}, horizons ({h1}, {h2}), censored {:?}",
                report.censored
            );
            for est in &report.estimates {
                println!(
                    "order {:>2}: {:.6} -> {:.6}  (rel change {:.4e})",
                    est.order,
                    est.at_first_horizon,
                    est.at_second_horizon,
                    est.relative_change
                );
            }
            println!("stable            {}", report.stable);
        }
    }
    Ok(())
}

type Series = Vec<(f64, f64)>;

/// Pulls the (n, column) series needed by the growth diagnostic out of one
/// scenario CSV.
fn series_from_csv(path: &std::path::Path) -> Result<(Series, Option<Series>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let n_col = col("n").context("no 'n' column")?;
    let n1_col = col("n1")
        .or_else(|| col("second_max"))
        .context("no 'n1' or 'second_max' column")?;
    let inferior_col = col("inferior");

    let mut n1_points = Vec::new();
    let mut inferior_points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let n: f64 = record[n_col].parse()?;
        n1_points.push((n, record[n1_col].parse()?));
        if let Some(c) = inferior_col {
            inferior_points.push((n, record[c].parse()?));
        }
    }
    Ok((n1_points, inferior_col.map(|_| inferior_points)))
}

fn run_diagnose(args: DiagnoseArgs) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .with_context(|| format!("cannot read directory {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no CSV files in {}", args.dir.display());
    }

    let mut diagnosed = 0usize;
    for path in &entries {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        match series_from_csv(path) {
            Ok((n1_points, inferior_points)) => {
                let slope = match log_slope(&n1_points) {
                    Ok(s) => s,
                    Err(e) => {
                        println!("{name}: skipped ({e})");
                        continue;
                    }
                };
                let verdict = if slope < FLAT_SLOPE_THRESHOLD {
                    "flat"
                } else {
                    "growing"
                };
                print!("{name}: n1 slope {slope:.4} per log-unit [{verdict}]");
                if let Some(points) = inferior_points {
                    match log_slope(&points) {
                        Ok(s) => print!(", inferior slope {s:.4}"),
                        Err(e) => print!(", inferior slope unavailable ({e})"),
                    }
                }
                println!();
                diagnosed += 1;
            }
            Err(e) => println!("{name}: skipped ({e:#})"),
        }
    }
    if diagnosed == 0 {
        bail!("no usable scenario CSV found in {}", args.dir.display());
    }
    Ok(())
}
