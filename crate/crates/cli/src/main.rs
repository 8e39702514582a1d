//! `heitler` command-line front end. Every command writes its files and a
//! `manifest.json` into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod axis;
mod figures;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heitler::acceptance;
use heitler::dynamics::spectrum_numeric;
use heitler::model::{validate, ConfigFile};
use heitler::moments::{gn_from_moments, liouvillian_steady_state};
use heitler::trajectories::{
    g2_zero_from_clicks, required_duration, simulate_clicks, steady_click_rate, waiting_time_cdf,
    ClickTrain,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::axis::Axis;
use crate::figures::FigureId;
use crate::output::{OutDir, ResolvedConfig};

/// Coupling used by `trajectories` unless the config file sets `g`.
const TRAJECTORY_G: f64 = 1e-2;

#[derive(Parser, Debug)]
#[command(name = "heitler", version, about = "Filtered and homodyne-compensated resonance fluorescence")]
#[command(args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat key = value parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Smaller grids and no Monte Carlo in `verify`.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Data behind a figure: 2a, 2b, 3a, 3b, 3c, 3d or 4.
    Figure { id: FigureId },
    /// Evaluate a quantity along one axis.
    Sweep {
        quantity: sweep::Quantity,
        /// `name=lin:lo:hi:n`, `name=log:lo:hi:n` or `name=v1,v2,...`.
        #[arg(long)]
        axis: Axis,
        /// Correlation order N.
        #[arg(long, short = 'N', default_value_t = 2)]
        order: u32,
        /// Detector linewidth for spectra.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Run the acceptance suite.
    Verify,
    /// Monte Carlo click trains and their waiting-time CDF.
    Trajectories {
        /// Expected number of clicks per trajectory.
        #[arg(long, conflicts_with = "duration")]
        clicks: Option<usize>,
        /// Length of each trajectory in units of 1/gamma_sigma.
        #[arg(long)]
        duration: Option<f64>,
        /// Number of independent trajectories, seeded from --seed upward.
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Coincidence window for the g2(0) estimate.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Emission spectrum of the driven emitter.
    Spectrum {
        /// Detector linewidth; omitted keeps the coherent peak as a delta.
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long, default_value_t = 5.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<heitler::Error> for Failure {
    fn from(e: heitler::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let file = match &g.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let (mut params, homodyne, truncation) = file.resolve();
    if matches!(cli.command, Command::Trajectories { .. }) && file.g.is_none() {
        params.g = TRAJECTORY_G * params.gamma_sigma;
    }
    let report = validate(&params, &homodyne, &truncation);
    for h in &report.hazards {
        log::warn!("{h}");
    }
    if !report.is_ok() {
        return Err(Failure::Usage(report.violations.join("; ")));
    }

    let mut out = OutDir::create(&g.out)?;
    let mut seeds = Vec::new();
    let mut verification_failed = false;
    match &cli.command {
        Command::Figure { id } => {
            let inputs = figures::Inputs {
                params,
                homodyne,
                truncation,
                seed: g.seed,
                quick: g.quick,
            };
            let fig = figures::render(*id, &inputs)?;
            for (name, csv) in &fig.files {
                out.write(name, csv)?;
            }
            seeds = fig.seeds;
        }
        Command::Sweep {
            quantity,
            axis,
            order,
            resolution,
        } => {
            let setup = sweep::Setup {
                params,
                homodyne,
                truncation,
                order: *order,
                resolution: *resolution,
            };
            let csv = sweep::run(*quantity, axis, &setup)?;
            out.write("sweep.csv", &csv)?;
        }
        Command::Verify => {
            let results = acceptance::run_all(g.quick);
            for r in &results {
                println!("{r}");
            }
            verification_failed = results.iter().any(|r| !r.passed);
            let json = serde_json::to_string_pretty(&results).map_err(|e| Failure::Usage(e.to_string()))?;
            out.write("verify.json", &(json + "\n"))?;
        }
        Command::Trajectories {
            clicks,
            duration,
            count,
            window,
        } => {
            let duration = match (clicks, duration) {
                (_, Some(d)) => *d,
                (Some(n), None) => required_duration(&params, &homodyne, &truncation, *n)?,
                (None, None) => required_duration(&params, &homodyne, &truncation, 10_000)?,
            };
            seeds = (g.seed..g.seed + count).collect();
            let trains: Vec<heitler::Result<ClickTrain>> = seeds
                .par_iter()
                .map(|&s| simulate_clicks(&params, &homodyne, &truncation, duration, s))
                .collect();
            let trains = trains.into_iter().collect::<heitler::Result<Vec<_>>>()?;
            let merged = ClickTrain::concat(&trains).ok_or_else(|| Failure::Usage("no trajectories".into()))?;
            out.write("clicks.csv", &merged.to_csv())?;
            let summary = trajectory_summary(&merged, &params, &homodyne, &truncation, *window)?;
            if merged.len() >= 2 {
                out.write("cdf.csv", &waiting_time_cdf(&merged)?.to_csv())?;
            }
            let json = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Usage(e.to_string()))?;
            out.write("summary.json", &(json + "\n"))?;
        }
        Command::Spectrum {
            resolution,
            omega_max,
            points,
        } => {
            if *points < 2 || !(*omega_max > 0.0) {
                return Err(Failure::Usage("empty grid".into()));
            }
            let grid: Vec<f64> = (0..*points)
                .map(|i| -omega_max + 2.0 * omega_max * i as f64 / (*points - 1) as f64)
                .collect();
            let curve = spectrum_numeric(&params, *resolution, &grid)?;
            out.write("spectrum.csv", &curve.to_csv())?;
        }
    }
    let command_line = std::env::args().skip(1).collect();
    out.finish(
        command_line,
        ResolvedConfig {
            params,
            homodyne,
            truncation,
        },
        seeds,
    )?;
    if verification_failed {
        return Err(Failure::Verification);
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    clicks: usize,
    emitter_jumps: usize,
    duration: f64,
    rate: f64,
    rate_stderr: f64,
    rate_expected: f64,
    window: f64,
    g2_zero: Option<f64>,
    g2_zero_stderr: Option<f64>,
    /// Master-equation `g2(0)` at the simulated coupling and at half of it.
    g2_master: [f64; 2],
}

fn trajectory_summary(
    train: &ClickTrain,
    params: &heitler::model::SystemParams,
    h: &heitler::model::HomodyneConfig,
    t: &heitler::model::TruncationConfig,
    window: Option<f64>,
) -> Result<TrajectorySummary, Failure> {
    let rate_expected = steady_click_rate(params, h, t)?;
    let window = window.unwrap_or_else(|| (0.5 / params.gamma_sigma).min(0.01 / rate_expected));
    let (g2_zero, g2_zero_stderr) = match g2_zero_from_clicks(train, window) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    let mut g2_master = [0.0; 2];
    for (i, s) in [1.0, 0.5].into_iter().enumerate() {
        let p = params.with_coupling(params.g * s);
        let rho = liouvillian_steady_state(&p, h, t)?;
        g2_master[i] = gn_from_moments(&rho.moments(&p.with_homodyne(h), 4), 2)?;
    }
    Ok(TrajectorySummary {
        clicks: train.len(),
        emitter_jumps: train.emitter_jumps,
        duration: train.duration,
        rate: train.rate(),
        rate_stderr: train.rate_stderr(),
        rate_expected,
        window,
        g2_zero,
        g2_zero_stderr,
        g2_master,
    })
}
