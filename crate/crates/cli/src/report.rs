//! Text summaries, JSON records and plot-ready CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use touchdrift_core::calibration::CalibrationResult;
use touchdrift_core::comparison::Comparison;
use touchdrift_core::engine::{BacktestReport, DriftSample, FillDriftAnalysis};
use touchdrift_core::fill_model::FillTechnique;
use touchdrift_core::stats::Proportion;
use touchdrift_core::theory::DriftReport;
use touchdrift_core::TickGrid;

use crate::error::{CliError, Result};
use crate::io::{create, write_fills, write_lifecycle};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

#[derive(Serialize)]
struct TechniqueRecord {
    name: &'static str,
    lambda_f: Option<f64>,
    r_f: Option<f64>,
    p_fill_down: Option<f64>,
    fill_hawkes_mu: Option<f64>,
    fill_hawkes_alpha: Option<f64>,
    fill_hawkes_beta: Option<f64>,
}

impl From<&FillTechnique> for TechniqueRecord {
    fn from(t: &FillTechnique) -> Self {
        let mut r = TechniqueRecord {
            name: t.name(),
            lambda_f: None,
            r_f: None,
            p_fill_down: None,
            fill_hawkes_mu: None,
            fill_hawkes_alpha: None,
            fill_hawkes_beta: None,
        };
        match *t {
            FillTechnique::AlwaysFillOnTrade => {}
            FillTechnique::ExponentialFill { lambda_f } => r.lambda_f = Some(lambda_f),
            FillTechnique::AdverseBernoulli { r_f, p_fill_down } => {
                r.r_f = Some(r_f);
                r.p_fill_down = Some(p_fill_down);
            }
            FillTechnique::GroundTruth {
                p_fill_down,
                hawkes,
            } => {
                r.p_fill_down = Some(p_fill_down);
                r.fill_hawkes_mu = Some(hawkes.mu);
                r.fill_hawkes_alpha = Some(hawkes.alpha);
                r.fill_hawkes_beta = Some(hawkes.beta);
            }
        }
        r
    }
}

#[derive(Serialize)]
struct BacktestRecord {
    technique: TechniqueRecord,
    seed: u64,
    tick_size: f64,
    pnl_window_s: f64,
    n_events: usize,
    n_orders: u64,
    n_fills: u64,
    global_fill_rate: f64,
    discarded_fills: u64,
    wide_spread_events: u64,
    final_position: i8,
    final_cash: f64,
    final_pnl: f64,
    final_pnl_half_ticks: i64,
}

fn backtest_summary(r: &BacktestReport, grid: TickGrid) -> String {
    let mut s = String::new();
    let adverse = r.fills.iter().filter(|f| f.adverse).count();
    let _ = writeln!(s, "technique = {}", r.technique.name());
    let _ = writeln!(s, "seed = {}", r.seed);
    let _ = writeln!(s, "events = {}", r.n_events);
    let _ = writeln!(s, "orders = {}", r.n_orders);
    let _ = writeln!(
        s,
        "fill_rate = {}/{} ({:.4})",
        r.n_fills,
        r.n_orders,
        r.global_fill_rate()
    );
    let _ = writeln!(s, "adverse_fills = {adverse}");
    let _ = writeln!(s, "discarded_fills = {}", r.discarded_fills);
    let _ = writeln!(s, "wide_spread_events = {}", r.wide_spread_events);
    let _ = writeln!(s, "final_position = {}", r.final_position);
    let _ = writeln!(
        s,
        "final_pnl = {} ({} half-ticks)",
        grid.half_ticks_to_price(r.final_pnl()),
        r.final_pnl()
    );
    s
}

/// Writes a backtest into `dir`: `summary.txt`, `report.json`, `fills.csv`,
/// `lifecycle.csv`, `pnl_windows.csv` and, when given, the drift tables.
pub fn write_backtest(
    dir: &Path,
    r: &BacktestReport,
    grid: TickGrid,
    drift: Option<&FillDriftAnalysis>,
) -> Result<String> {
    ensure_dir(dir)?;
    let summary = backtest_summary(r, grid);
    write_file(&dir.join("summary.txt"), &summary)?;
    json_file(
        &dir.join("report.json"),
        &BacktestRecord {
            technique: (&r.technique).into(),
            seed: r.seed,
            tick_size: grid.tick_size(),
            pnl_window_s: r.window_s,
            n_events: r.n_events,
            n_orders: r.n_orders,
            n_fills: r.n_fills,
            global_fill_rate: r.global_fill_rate(),
            discarded_fills: r.discarded_fills,
            wide_spread_events: r.wide_spread_events,
            final_position: r.final_position,
            final_cash: grid.half_ticks_to_price(r.final_cash),
            final_pnl: grid.half_ticks_to_price(r.final_pnl()),
            final_pnl_half_ticks: r.final_pnl(),
        },
    )?;
    write_fills(create(&dir.join("fills.csv"))?, &r.fills, grid)?;
    write_lifecycle(create(&dir.join("lifecycle.csv"))?, &r.lifecycle, grid)?;
    let path = dir.join("pnl_windows.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["window", "end_time_s", "pnl", "pnl_half_ticks"])?;
    for win in &r.pnl_windows {
        w.write_record([
            win.index.to_string(),
            win.end_time_s.to_string(),
            grid.half_ticks_to_price(win.pnl).to_string(),
            win.pnl.to_string(),
        ])?;
    }
    w.flush().map_err(CliError::io(&path))?;
    if let Some(d) = drift {
        write_drift(dir, d)?;
    }
    Ok(summary)
}

fn panels(d: &FillDriftAnalysis) -> [(&'static str, &DriftSample); 3] {
    [("buy", &d.buy), ("sell", &d.sell), ("control", &d.control)]
}

/// Per-fill samples, cumulative sums and histograms for the buy, sell and
/// random-time control panels, plus a text summary.
pub fn write_drift(dir: &Path, d: &FillDriftAnalysis) -> Result<String> {
    ensure_dir(dir)?;
    let samples = dir.join("drift_samples.csv");
    let mut w = csv::Writer::from_writer(create(&samples)?);
    w.write_record(["panel", "index", "move_ticks", "cumulative_ticks"])?;
    for (name, sample) in panels(d) {
        for (i, (x, c)) in sample.ticks().zip(sample.cumulative_ticks()).enumerate() {
            w.write_record([
                name.to_string(),
                i.to_string(),
                x.to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush().map_err(CliError::io(&samples))?;

    let hist = dir.join("drift_histogram.csv");
    let mut w = csv::Writer::from_writer(create(&hist)?);
    w.write_record(["panel", "move_ticks", "count"])?;
    for (name, sample) in panels(d) {
        for (h, count) in sample.histogram() {
            w.write_record([
                name.to_string(),
                (h as f64 / 2.0).to_string(),
                count.to_string(),
            ])?;
        }
    }
    w.flush().map_err(CliError::io(&hist))?;

    let mut s = String::new();
    let _ = writeln!(s, "window_events = {}", d.window_events);
    for (name, sample) in panels(d) {
        match sample.estimate() {
            Some(e) => {
                let _ = writeln!(
                    s,
                    "{name} = n {} mean {:.6} ticks std_err {:.6}",
                    e.n, e.mean, e.std_err
                );
            }
            None => {
                let _ = writeln!(s, "{name} = n 0");
            }
        }
    }
    if let Some(p) = d.pooled_against_order() {
        let _ = writeln!(
            s,
            "pooled_against_order = n {} mean {:.6} ticks std_err {:.6}",
            p.n, p.mean, p.std_err
        );
    }
    write_file(&dir.join("drift_summary.txt"), &s)?;
    Ok(s)
}

pub fn format_theory(umd: Option<&DriftReport>, gchp: Option<&DriftReport>) -> String {
    let mut s = String::new();
    let mut block = |prefix: &str, r: &DriftReport| {
        let _ = writeln!(
            s,
            "{prefix}drift_unconditional_ticks = {:.4}",
            r.drift_unconditional_ticks
        );
        let _ = writeln!(s, "{prefix}fill_probability = {:.5}", r.fill_probability);
        let _ = writeln!(
            s,
            "{prefix}drift_given_fill_ticks = {:.2}",
            r.drift_given_fill_ticks
        );
        let _ = writeln!(
            s,
            "{prefix}drift_given_fill_ticks_full = {:.6}",
            r.drift_given_fill_ticks
        );
    };
    if let Some(u) = umd {
        block("", u);
    }
    if let Some(g) = gchp {
        block("gchp_", g);
    }
    s
}

#[derive(Serialize)]
struct ProportionRecord {
    value: f64,
    std_err: f64,
    successes: u64,
    trials: u64,
}

impl From<Proportion> for ProportionRecord {
    fn from(p: Proportion) -> Self {
        Self {
            value: p.value,
            std_err: p.std_err,
            successes: p.successes,
            trials: p.trials,
        }
    }
}

#[derive(Serialize)]
struct RateRecord {
    value: f64,
    std_err: f64,
    gaps: u64,
}

#[derive(Serialize)]
struct CalibrationRecord {
    resample_interval_s: f64,
    n_intervals: u64,
    n_multi_tick: u64,
    p_up: ProportionRecord,
    p_mid: ProportionRecord,
    p_down: ProportionRecord,
    r_f: Option<ProportionRecord>,
    p_fill_down: Option<ProportionRecord>,
    lambda_f: Option<RateRecord>,
}

/// Writes the calibration as `key = value` text at `path` and as JSON next to
/// it (`path` with `.json` appended).
pub fn write_calibration(path: &Path, c: &CalibrationResult, interval_s: f64) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "resample_interval_s = {interval_s}");
    let _ = writeln!(s, "n_intervals = {}", c.n_intervals);
    let _ = writeln!(s, "n_multi_tick = {}", c.n_multi_tick);
    let mut prop = |key: &str, p: Option<Proportion>| match p {
        Some(p) => {
            let _ = writeln!(s, "{key} = {:.6}", p.value);
            let _ = writeln!(s, "{key}_std_err = {:.6}", p.std_err);
        }
        None => {
            let _ = writeln!(s, "{key} = insufficient data");
        }
    };
    prop("p_up", Some(c.umd.p_up));
    prop("p_mid", Some(c.umd.p_mid));
    prop("p_down", Some(c.umd.p_down));
    prop("r_f", c.r_f);
    prop("p_fill_down", c.p_fill_down);
    match c.lambda_f {
        Some(l) => {
            let _ = writeln!(s, "lambda_f = {:.6}", l.rate);
            let _ = writeln!(s, "lambda_f_std_err = {:.6}", l.std_err);
        }
        None => {
            let _ = writeln!(s, "lambda_f = insufficient data");
        }
    }
    write_file(path, &s)?;
    let mut json_path = path.as_os_str().to_owned();
    json_path.push(".json");
    json_file(
        Path::new(&json_path),
        &CalibrationRecord {
            resample_interval_s: interval_s,
            n_intervals: c.n_intervals,
            n_multi_tick: c.n_multi_tick,
            p_up: c.umd.p_up.into(),
            p_mid: c.umd.p_mid.into(),
            p_down: c.umd.p_down.into(),
            r_f: c.r_f.map(Into::into),
            p_fill_down: c.p_fill_down.map(Into::into),
            lambda_f: c.lambda_f.map(|l| RateRecord {
                value: l.rate,
                std_err: l.std_err,
                gaps: l.n_gaps,
            }),
        },
    )?;
    Ok(s)
}

/// Orders-and-fills table, windowed P&L per technique and P&L distances for
/// every seed of a comparison run.
pub fn write_comparison(dir: &Path, runs: &[(u64, Comparison)], grid: TickGrid) -> Result<String> {
    ensure_dir(dir)?;
    let table = dir.join("orders_and_fills.csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    w.write_record([
        "seed",
        "technique",
        "n_orders",
        "n_fills",
        "global_fill_rate",
    ])?;
    for (seed, c) in runs {
        for row in c.rows() {
            w.write_record([
                seed.to_string(),
                row.technique.to_string(),
                row.n_orders.to_string(),
                row.n_fills.to_string(),
                row.global_fill_rate.to_string(),
            ])?;
        }
    }
    w.flush().map_err(CliError::io(&table))?;

    let pnl = dir.join("pnl_windows.csv");
    let mut w = csv::Writer::from_writer(create(&pnl)?);
    w.write_record([
        "seed",
        "window",
        "end_time_s",
        "technique-1",
        "technique-2",
        "technique-3",
        "ground-truth",
    ])?;
    for (seed, c) in runs {
        let reports = [
            &c.techniques[0],
            &c.techniques[1],
            &c.techniques[2],
            &c.ground_truth,
        ];
        for (i, win) in c.ground_truth.pnl_windows.iter().enumerate() {
            let mut rec = vec![
                seed.to_string(),
                win.index.to_string(),
                win.end_time_s.to_string(),
            ];
            for r in reports {
                let v = r.pnl_windows.get(i).map_or(0, |w| w.pnl);
                rec.push(grid.half_ticks_to_price(v).to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(CliError::io(&pnl))?;

    let dist = dir.join("pnl_distance.csv");
    let mut w = csv::Writer::from_writer(create(&dist)?);
    w.write_record(["seed", "technique", "pnl_rms_distance"])?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14}{:>10}{:>10}{:>18}",
        "technique", "orders", "fills", "global_fill_rate"
    );
    let names = ["technique-1", "technique-2", "technique-3", "ground-truth"];
    let mut totals = [(0u64, 0u64); 4];
    for (seed, c) in runs {
        for (t, row) in totals.iter_mut().zip(c.rows()) {
            t.0 += row.n_orders;
            t.1 += row.n_fills;
        }
        for (name, d) in names.iter().zip(c.pnl_distances()?) {
            w.write_record([
                seed.to_string(),
                name.to_string(),
                (d * grid.half_tick()).to_string(),
            ])?;
        }
    }
    w.flush().map_err(CliError::io(&dist))?;
    for (name, (orders, fills)) in names.iter().zip(totals) {
        let rate = if orders == 0 {
            0.0
        } else {
            fills as f64 / orders as f64
        };
        let _ = writeln!(s, "{name:<14}{orders:>10}{fills:>10}{rate:>18.4}");
    }
    for (seed, c) in runs {
        let k = c.calibrated;
        let _ = writeln!(
            s,
            "seed {seed}: calibrated lambda_f = {:.6}, r_f = {:.6}, p_fill_down = {:.6}",
            k.lambda_f, k.r_f, k.p_fill_down
        );
    }
    write_file(&dir.join("summary.txt"), &s)?;
    Ok(s)
}
