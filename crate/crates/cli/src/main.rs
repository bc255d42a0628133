//! `kdglm`: fit, smooth and forecast dynamic generalized linear models
//! on CSV time series, or draw synthetic series from a configured model.

mod config;
mod fail;
mod run;
mod table;

use clap::{Parser, Subcommand};
use fail::Fail;
use run::FitReport;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Parser)]
#[command(
    name = "kdglm",
    version,
    about = "Sequential Bayesian fitting and forecasting for count, binary, \
             compositional and Gaussian time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, smooth and forecast one or more series
    Fit {
        /// JSON run configuration
        #[arg(long)]
        config: PathBuf,
        /// Data CSV; repeat the flag to fit several series with one config
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        /// Output directory; with several --data files each series writes
        /// to a subdirectory named after its file stem
        #[arg(long)]
        out: PathBuf,
        /// Override the forecast horizon J from the config
        #[arg(long)]
        horizon: Option<usize>,
        /// Use the closed-form digamma approximation for Poisson steps
        #[arg(long)]
        fast_poisson: bool,
    },
    /// Draw a synthetic series (plus its ground truth) from the model
    Simulate {
        /// JSON run configuration with a simulation block
        #[arg(long)]
        config: PathBuf,
        /// RNG seed; equal seeds give byte-identical files
        #[arg(long)]
        seed: u64,
        /// Output directory for data.csv and truth.csv
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(fail) = dispatch(cli) {
        eprintln!("{fail}");
        std::process::exit(fail.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<(), Fail> {
    match cli.command {
        Command::Fit {
            config,
            data,
            out,
            horizon,
            fast_poisson,
        } => fit_many(&config, &data, &out, horizon, fast_poisson),
        Command::Simulate { config, seed, out } => {
            let cfg = config::load(&config)?;
            for path in run::run_simulate(&cfg, seed, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn fit_many(
    config_path: &Path,
    data: &[PathBuf],
    out: &Path,
    horizon: Option<usize>,
    fast: bool,
) -> Result<(), Fail> {
    let cfg = config::load(config_path)?;
    if data.len() == 1 {
        let report = run::run_fit(&cfg, &data[0], out, horizon, fast)?;
        print_report("", &report);
        return Ok(());
    }

    // Several series share one config; each writes under out/<stem>/ and
    // the runs proceed in parallel up to the KDGLM_THREADS cap.
    let mut stems: Vec<String> = Vec::with_capacity(data.len());
    for path in data {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Fail::Config(format!("{} has no file name", path.display())))?;
        if stems.contains(&stem) {
            return Err(Fail::Config(format!(
                "duplicate data file stem '{stem}': outputs would collide"
            )));
        }
        stems.push(stem);
    }

    let threads = thread_cap(data.len())?;
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<FitReport, Fail>>>> =
        data.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= data.len() {
                    break;
                }
                let result = run::run_fit(&cfg, &data[i], &out.join(&stems[i]), horizon, fast);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });

    // Successes report normally; the first failure decides the exit code
    // after every other failure has been printed.
    let mut first_failure: Option<Fail> = None;
    for (stem, slot) in stems.iter().zip(results) {
        match slot.into_inner().unwrap().expect("every job ran") {
            Ok(report) => print_report(&format!("{stem}: "), &report),
            Err(fail) => {
                let fail = fail.with_prefix(stem);
                if first_failure.is_none() {
                    first_failure = Some(fail);
                } else {
                    eprintln!("{fail}");
                }
            }
        }
    }
    match first_failure {
        None => Ok(()),
        Some(fail) => Err(fail),
    }
}

fn print_report(prefix: &str, report: &FitReport) {
    println!(
        "{prefix}total log predictive score: {}",
        report.total_score
    );
    println!("{prefix}wall clock: {} ms", report.wall.as_millis());
    for path in &report.written {
        println!("{prefix}wrote {}", path.display());
    }
}

/// Worker count for multi-series fits: the KDGLM_THREADS env var caps the
/// hardware parallelism, and there is never a reason to exceed the number
/// of series.
fn thread_cap(n_jobs: usize) -> Result<usize, Fail> {
    let cap = match std::env::var("KDGLM_THREADS") {
        Err(_) => None,
        Ok(raw) => Some(
            raw.parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| {
                    Fail::Config(format!("KDGLM_THREADS='{raw}' is not a positive integer"))
                })?,
        ),
    };
    let hardware = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    Ok(cap.unwrap_or(hardware).clamp(1, n_jobs.max(1)))
}
