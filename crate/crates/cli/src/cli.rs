//! Command-line surface. Exit codes: 0 success, 1 runtime error, 2 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use touchdrift_core::calibration::calibrate;
use touchdrift_core::comparison::{run_comparison, Comparison};
use touchdrift_core::engine::{drift_after_fills, run_backtest};
use touchdrift_core::market_model::{attach_trades, GchpStream, UmdStream};
use touchdrift_core::theory::DriftReport;
use touchdrift_core::MarketEvent;

use crate::config::{RunConfig, TechniqueKind};
use crate::error::Result;
use crate::io::{open, read_events_file, read_fills, read_lifecycle, write_events_file};
use crate::report::{
    format_theory, write_backtest, write_calibration, write_comparison, write_drift,
};

#[derive(Parser, Debug)]
#[command(
    name = "touchdrift",
    version,
    about = "At-the-touch market making simulator and backtester"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Umd,
    Gchp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TechniqueArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "ground-truth")]
    GroundTruth,
}

impl From<TechniqueArg> for TechniqueKind {
    fn from(t: TechniqueArg) -> Self {
        match t {
            TechniqueArg::One => TechniqueKind::AlwaysFillOnTrade,
            TechniqueArg::Two => TechniqueKind::Exponential,
            TechniqueArg::Three => TechniqueKind::AdverseBernoulli,
            TechniqueArg::GroundTruth => TechniqueKind::GroundTruth,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic event file.
    Simulate {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        config: PathBuf,
        /// Number of events.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print closed-form drift and fill probability.
    Theory {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate model parameters from an event file.
    Calibrate {
        #[arg(long)]
        events: PathBuf,
        /// Order lifecycle CSV from a backtest, for fill rates.
        #[arg(long)]
        lifecycle: Option<PathBuf>,
        /// Resampling interval in seconds.
        #[arg(long, default_value_t = 1.0)]
        resample: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the market maker over an event file.
    Backtest {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_enum)]
        technique: TechniqueArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every technique and the ground truth over one event file.
    Compare {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mid drift after the fills of a backtest report.
    Drift {
        /// Backtest output directory, or its fills.csv.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        window: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn simulate(
    model: ModelArg,
    config: &Path,
    steps: u64,
    seed: Option<u64>,
    out: &Path,
) -> Result<String> {
    let cfg = RunConfig::load(config)?;
    let grid = cfg.grid()?;
    let seed = seed.map_or_else(|| cfg.seed(), Ok)?;
    let start_mid = cfg.start_mid(grid)?;
    let mut events: Vec<MarketEvent> = match model {
        ModelArg::Umd => UmdStream::new(cfg.model_params()?, cfg.dt_s()?, start_mid, seed)?
            .take(steps as usize)
            .collect(),
        ModelArg::Gchp => {
            GchpStream::new(cfg.gchp_params()?, cfg.gchp_start_state()?, start_mid, seed)?
                .take(steps as usize)
                .collect()
        }
    };
    attach_trades(&mut events, &cfg.trade_flow()?, seed);
    write_events_file(out, &events, grid)?;
    Ok(format!(
        "wrote {} events to {}\n",
        events.len(),
        out.display()
    ))
}

fn theory(config: &Path) -> Result<String> {
    let cfg = RunConfig::load(config)?;
    let umd = if cfg.contains("p_up") || !cfg.has_gchp() {
        Some(DriftReport::umd(&cfg.model_params()?)?)
    } else {
        None
    };
    let gchp = if cfg.has_gchp() {
        Some(DriftReport::gchp(&cfg.gchp_params()?, cfg.r_f()?)?)
    } else {
        None
    };
    Ok(format_theory(umd.as_ref(), gchp.as_ref()))
}

fn calibrate_cmd(
    events: &Path,
    lifecycle: Option<&Path>,
    interval_s: f64,
    out: &Path,
) -> Result<String> {
    let file = read_events_file(events, None)?;
    let lifecycle = lifecycle
        .map(|p| read_lifecycle(open(p)?, file.grid))
        .transpose()?;
    let result = calibrate(&file.events, lifecycle.as_deref(), interval_s)?;
    write_calibration(out, &result, interval_s)
}

fn backtest(
    events: &Path,
    technique: TechniqueArg,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<String> {
    let cfg = load_config(config)?;
    let file = read_events_file(events, None)?;
    let seed = seed.map_or_else(|| cfg.seed(), Ok)?;
    let technique = cfg.technique(technique.into())?;
    let report = run_backtest(&file.events, technique, cfg.pnl_window_s()?, seed)?;
    let drift = if report.fills.is_empty() {
        None
    } else {
        Some(drift_after_fills(
            &report.fills,
            &file.events,
            cfg.drift_window()?,
            seed,
        )?)
    };
    write_backtest(out, &report, file.grid, drift.as_ref())
}

fn compare(events: &Path, config: &Path, seeds: &[u64], out: &Path) -> Result<String> {
    let cfg = RunConfig::load(config)?;
    let file = read_events_file(events, None)?;
    let truth = cfg.ground_truth()?;
    let window_s = cfg.pnl_window_s()?;
    let runs: Vec<touchdrift_core::Result<Comparison>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let events = &file.events;
                scope.spawn(move || run_comparison(events, truth, window_s, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });
    let mut done = Vec::with_capacity(runs.len());
    for (seed, run) in seeds.iter().zip(runs) {
        done.push((*seed, run?));
    }
    write_comparison(out, &done, file.grid)
}

fn drift(report: &Path, events: &Path, window: u64, seed: u64, out: &Path) -> Result<String> {
    let file = read_events_file(events, None)?;
    let fills_path = if report.is_dir() {
        report.join("fills.csv")
    } else {
        report.to_path_buf()
    };
    let fills = read_fills(open(&fills_path)?, file.grid)?;
    let analysis = drift_after_fills(&fills, &file.events, window as usize, seed)?;
    write_drift(out, &analysis)
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::Simulate {
            model,
            config,
            steps,
            seed,
            out,
        } => simulate(model, &config, steps, seed, &out),
        Command::Theory { config } => theory(&config),
        Command::Calibrate {
            events,
            lifecycle,
            resample,
            out,
        } => calibrate_cmd(&events, lifecycle.as_deref(), resample, &out),
        Command::Backtest {
            events,
            technique,
            config,
            seed,
            out,
        } => backtest(&events, technique, config.as_deref(), seed, &out),
        Command::Compare {
            events,
            config,
            seeds,
            out,
        } => compare(&events, &config, &seeds, &out),
        Command::Drift {
            report,
            events,
            window,
            seed,
            out,
        } => drift(&report, &events, window, seed, &out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
