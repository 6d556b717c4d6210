//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use touchdrift::io::{read_events, write_events};
use touchdrift_core::calibration::{calibrate, estimate_lambda_f, interarrival_tail_report};
use touchdrift_core::comparison::{run_comparison, Comparison};
use touchdrift_core::engine::{mark_to_market, run_backtest, BacktestReport, DEFAULT_PNL_WINDOW_S};
use touchdrift_core::fill_model::{probe_conditional_drift, probe_fill_moves, FillTechnique};
use touchdrift_core::market_model::{
    attach_trades, simulate_umd, GchpParams, GchpStream, HawkesParams, ModelParams,
    TradeFlowParams, DEFAULT_START_MID,
};
use touchdrift_core::stats::batch_means;
use touchdrift_core::theory::{drift_given_fill, gchp_drift_given_fill};
use touchdrift_core::{MarketEvent, MoveDirection, Side, TickGrid};

const REFERENCE_DRIFT: f64 = -0.4857;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn adverse(r_f: f64, p_fill_down: f64) -> FillTechnique {
    FillTechnique::AdverseBernoulli { r_f, p_fill_down }
}

fn closed_form_drift() -> Outcome {
    let m = ModelParams::ten_year_note_1s();
    let start = Instant::now();
    let d = drift_given_fill(&m).unwrap();
    let elapsed = start.elapsed();
    let pass = (d - REFERENCE_DRIFT).abs() <= 0.005
        && format!("{d:.2}") == "-0.49"
        && (d - (-0.48)).abs() < 0.01
        && elapsed < Duration::from_millis(1);
    outcome(
        pass,
        format!("drift_given_fill = {d:.6} ticks in {elapsed:?}"),
    )
}

fn monte_carlo_umd() -> Outcome {
    let m = ModelParams::ten_year_note_1s();
    let events = simulate_umd(m, 1_000_000, 1.0, DEFAULT_START_MID, 2).unwrap();
    let est = probe_conditional_drift(&events, adverse(m.r_f, 1.0), Side::Buy, 2).unwrap();
    let z = est.z_score(REFERENCE_DRIFT);
    outcome(
        z.abs() <= 3.0,
        format!(
            "buy-side mean {:.5} ± {:.5} over {} fills, z = {z:.2}",
            est.mean, est.std_err, est.n
        ),
    )
}

fn monte_carlo_gchp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sets: Vec<(f64, HawkesParams, u64)> = (0..6)
        .map(|_| {
            let p_stay = rng.random_range(0.05..0.95);
            let beta = rng.random_range(0.5..3.0);
            let alpha = beta * rng.random_range(0.0..0.8);
            let hawkes = HawkesParams::new(rng.random_range(0.2..2.0), alpha, beta).unwrap();
            (p_stay, hawkes, rng.random())
        })
        .collect();
    let cases: Vec<(usize, f64)> = (0..sets.len())
        .flat_map(|i| [0.0, 0.25, 0.5].map(|r| (i, r)))
        .collect();
    let results: Vec<(f64, f64, f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .map(|&(i, r_f)| {
                let (p_stay, hawkes, stream_seed) = sets[i];
                s.spawn(move || {
                    let g = GchpParams::symmetric(p_stay, hawkes).unwrap();
                    let events: Vec<MarketEvent> =
                        GchpStream::new(g, MoveDirection::Up, DEFAULT_START_MID, stream_seed)
                            .unwrap()
                            .take(1_000_001)
                            .collect();
                    let moves =
                        probe_fill_moves(&events, adverse(r_f, 1.0), Side::Buy, i as u64).unwrap();
                    let est = batch_means(&moves, 100).unwrap();
                    let theory = gchp_drift_given_fill(&g, r_f).unwrap();
                    (p_stay, r_f, est.mean - theory, est.std_err)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = results
        .iter()
        .map(|&(_, _, diff, se)| {
            if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let pass = results
        .iter()
        .all(|&(_, _, diff, se)| diff.abs() <= 3.0 * se + 1e-12);
    outcome(
        pass,
        format!(
            "{} sets x 3 rates, 10^6 moves each, worst |z| = {worst:.2}",
            sets.len()
        ),
    )
}

fn sign_theorems() -> Outcome {
    let config = Config::with_cases(1000);
    let mut umd = TestRunner::new_with_rng(
        config.clone(),
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let umd_result = umd.run(&(1e-6f64..0.5, 0.0f64..1.0), |(p, r_f)| {
        let m = ModelParams::new(p, 1.0 - 2.0 * p, p, r_f, 1.0).unwrap();
        prop_assert!(drift_given_fill(&m).unwrap() < 0.0);
        Ok(())
    });
    let mut gchp =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let gchp_result = gchp.run(&(1e-6f64..1.0 - 1e-6, 0.0f64..1.0), |(p_stay, r_f)| {
        let g = GchpParams::symmetric(p_stay, HawkesParams::poisson(1.0).unwrap()).unwrap();
        prop_assert!(gchp_drift_given_fill(&g, r_f).unwrap() < 0.0);
        Ok(())
    });
    let detail = format!(
        "1000 symmetric draws each: discrete {}, Markov-Hawkes {}",
        if umd_result.is_ok() {
            "0 counterexamples"
        } else {
            "counterexample found"
        },
        if gchp_result.is_ok() {
            "0 counterexamples"
        } else {
            "counterexample found"
        },
    );
    outcome(umd_result.is_ok() && gchp_result.is_ok(), detail)
}

fn calibration_round_trip() -> Outcome {
    let truth = ModelParams::new(0.0173, 1.0 - 2.0 * 0.0173, 0.0173, 0.018, 0.99).unwrap();
    let targets = [
        truth.p_up,
        truth.p_mid,
        truth.p_down,
        truth.r_f,
        truth.p_fill_down,
    ];
    let seeds: Vec<u64> = (0..20).collect();
    let hits: Vec<[bool; 5]> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let events = simulate_umd(truth, 20_001, 1.0, DEFAULT_START_MID, seed).unwrap();
                    let r =
                        run_backtest(&events, adverse(truth.r_f, truth.p_fill_down), 300.0, seed)
                            .unwrap();
                    let c = calibrate(&events, Some(&r.lifecycle), 1.0).unwrap();
                    let est = [
                        Some(c.umd.p_up),
                        Some(c.umd.p_mid),
                        Some(c.umd.p_down),
                        c.r_f,
                        c.p_fill_down,
                    ];
                    let mut ok = [false; 5];
                    for (k, e) in est.iter().enumerate() {
                        ok[k] = e.is_some_and(|p| p.within_sigmas(targets[k], 3.0));
                    }
                    ok
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut counts = [0usize; 5];
    for h in &hits {
        for (c, ok) in counts.iter_mut().zip(h) {
            *c += *ok as usize;
        }
    }
    let need = (0.95 * seeds.len() as f64).ceil() as usize;
    outcome(
        counts.iter().all(|&c| c >= need),
        format!(
            "20,000 one-second intervals x 20 seeds; within 3 sigma (p_up, p_mid, p_down, r_f, p_fill_down) = {counts:?}/20"
        ),
    )
}

fn lambda_estimator() -> Outcome {
    let uniform: Vec<f64> = (0..1001).map(|k| k as f64 * 11.9).collect();
    let a = estimate_lambda_f(&uniform).unwrap().rate;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let raw: Vec<f64> = (0..1000)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let scale = 11.9 / (raw.iter().sum::<f64>() / raw.len() as f64);
    let mut t = 0.0;
    let mut irregular = vec![0.0];
    for g in raw {
        t += g * scale;
        irregular.push(t);
    }
    let b = estimate_lambda_f(&irregular).unwrap().rate;
    let pass =
        (a - 0.0840).abs() <= 0.0005 && (b - 0.0840).abs() <= 0.0005 && (a - 0.0842).abs() < 0.0005;
    outcome(
        pass,
        format!("regular gaps {a:.5}/s, exponential gaps {b:.5}/s"),
    )
}

const COMPARISON_SEEDS: u64 = 10;

fn ground_truth_technique() -> FillTechnique {
    let (ratio, beta, rate) = (0.85, 0.2, 0.02);
    FillTechnique::GroundTruth {
        p_fill_down: 0.99,
        hawkes: HawkesParams::new(rate * (1.0 - ratio), ratio * beta, beta).unwrap(),
    }
}

fn comparison_stream(seed: u64) -> Vec<MarketEvent> {
    let p = 0.0019;
    let m = ModelParams::new(p, 1.0 - 2.0 * p, p, 0.0, 1.0).unwrap();
    let mut events = simulate_umd(m, 500_000, 0.05, DEFAULT_START_MID, seed).unwrap();
    attach_trades(&mut events, &TradeFlowParams::default(), seed);
    events
}

struct ComparisonRuns {
    runs: Vec<(Vec<MarketEvent>, Comparison)>,
    elapsed: Duration,
}

fn comparisons() -> &'static ComparisonRuns {
    static RUNS: OnceLock<ComparisonRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let runs = std::thread::scope(|s| {
            let handles: Vec<_> = (0..COMPARISON_SEEDS)
                .map(|seed| {
                    s.spawn(move || {
                        let events = comparison_stream(seed);
                        let c = run_comparison(
                            &events,
                            ground_truth_technique(),
                            DEFAULT_PNL_WINDOW_S,
                            seed,
                        )
                        .unwrap();
                        (events, c)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        ComparisonRuns {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

fn technique_ordering() -> Outcome {
    let all = comparisons();
    let mut counts = [0usize; 3];
    for (_, c) in &all.runs {
        let rows = c.rows();
        let truth = rows[3];
        let gap = |k: usize| (rows[k].global_fill_rate - truth.global_fill_rate).abs();
        let d = c.pnl_distances().unwrap();
        counts[0] += (rows[0].n_fills >= 3 * truth.n_fills) as usize;
        counts[1] += (gap(2) < gap(1) && gap(2) < gap(0)) as usize;
        counts[2] += (d[2] < d[0] && d[2] < d[1]) as usize;
    }
    let pass = counts.iter().all(|&c| c >= 8) && all.elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "5x10^5 events x 10 seeds in {:.1?}: fills >= 3x {}/10, closest fill rate {}/10, smallest P&L distance {}/10",
            all.elapsed, counts[0], counts[1], counts[2]
        ),
    )
}

fn exponential_misfit() -> Outcome {
    let all = comparisons();
    let mut rejected = 0;
    let mut min_fills = usize::MAX;
    let mut worst_p: f64 = 0.0;
    for (seed, (_, c)) in all.runs.iter().enumerate() {
        let times = c.ground_truth.fill_times();
        min_fills = min_fills.min(times.len());
        let lambda = estimate_lambda_f(&times).unwrap().rate;
        let tail = interarrival_tail_report(&times, lambda, seed as u64, 40).unwrap();
        worst_p = worst_p.max(tail.two_sample.p_value);
        rejected += tail.two_sample.rejects_at(0.01) as usize;
    }
    let exp_times = |seed: u64, n: usize, rate: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        (0..n)
            .map(|_| {
                t += -(1.0 - rng.random::<f64>()).ln() / rate;
                t
            })
            .collect::<Vec<f64>>()
    };
    let self_check = |seed: u64| {
        let times = exp_times(seed, 1500, 0.0571);
        let lambda = estimate_lambda_f(&times).unwrap().rate;
        interarrival_tail_report(&times, lambda, seed, 40).unwrap()
    };
    let designated = self_check(8);
    let false_alarms = (100..300)
        .filter(|&s| self_check(s).two_sample.rejects_at(0.05))
        .count();
    let pass = rejected == all.runs.len()
        && min_fills >= 1000
        && !designated.two_sample.rejects_at(0.05)
        && false_alarms <= 20;
    outcome(
        pass,
        format!(
            "clustered fills (n >= {min_fills}) rejected at 1% in {rejected}/{} runs (max p {worst_p:.1e}); exponential fills p = {:.2}, false alarms at 5% {false_alarms}/200",
            all.runs.len(),
            designated.two_sample.p_value
        ),
    )
}

/// Replays fills into cash and position and checks every per-event value.
fn accounting_holds(report: &BacktestReport, events: &[MarketEvent]) -> bool {
    let mut cash = 0i64;
    let mut position = 0i64;
    let mut fills = report.fills.iter().peekable();
    for (k, e) in events.iter().enumerate() {
        while let Some(f) = fills.next_if(|f| f.fill_seq == e.seq) {
            cash -= f.side.sign() * f.fill_price.0;
            position += f.side.sign();
        }
        let mid = e.mid_lenient().unwrap();
        if report.position_series[k] as i64 != position
            || !(-1..=1).contains(&position)
            || report.pnl_series[k] != cash + position * mid.0
            || report.pnl_series[k] != mark_to_market(cash, position as i8, mid)
        {
            return false;
        }
    }
    fills.next().is_none() && report.final_cash == cash
}

fn accounting_invariants() -> Outcome {
    let all = comparisons();
    let mut checked = 0;
    let mut ok = true;
    for (events, c) in &all.runs {
        for r in c.techniques.iter().chain([&c.ground_truth]) {
            ok &= accounting_holds(r, events);
            checked += 1;
        }
    }
    let grid = TickGrid::TEN_YEAR_NOTE;
    let events = &all.runs[0].0;
    let round_trip_ok = events.iter().all(|e| {
        let cash = -e.best_ask.0 + e.best_bid.0;
        let pnl = mark_to_market(cash, 0, e.mid_lenient().unwrap());
        pnl == -2 && grid.half_ticks_to_price(pnl) == -grid.tick_size()
    });
    outcome(
        ok && round_trip_ok,
        format!(
            "{checked} runs replayed event by event; market round trip costs exactly one tick on {} events",
            events.len()
        ),
    )
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_touchdrift"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism_and_serialization() -> Outcome {
    let grid = TickGrid::TEN_YEAR_NOTE;
    let mut umd = comparison_stream(4);
    umd.truncate(50_000);
    let g = GchpParams::symmetric(0.3, HawkesParams::new(0.5, 0.4, 1.0).unwrap()).unwrap();
    let mut gchp: Vec<MarketEvent> = GchpStream::new(g, MoveDirection::Down, DEFAULT_START_MID, 4)
        .unwrap()
        .take(20_000)
        .collect();
    attach_trades(&mut gchp, &TradeFlowParams::default(), 4);
    let mut round_trip = true;
    for stream in [&umd, &gchp] {
        let mut bytes = Vec::new();
        write_events(&mut bytes, stream, grid).unwrap();
        let back = read_events(bytes.as_slice(), None).unwrap();
        let mut again = Vec::new();
        write_events(&mut again, &back.events, back.grid).unwrap();
        round_trip &= back.events == *stream && again == bytes;
    }

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.cfg"),
        "p_up = 0.0019\np_mid = 0.9962\np_down = 0.0019\nr_f = 0.0003\np_fill_down = 0.99\ndt_s = 0.05\nlambda_f = 0.057\nfill_hawkes_mu = 0.003\nfill_hawkes_alpha = 0.17\nfill_hawkes_beta = 0.2\nseed = 11\n",
    )
    .unwrap();
    let s = |p: &str| d.join(p).to_string_lossy().into_owned();
    let mut identical = true;
    for run in ["a", "b"] {
        identical &= cli(&[
            "simulate",
            "--model",
            "umd",
            "--config",
            &s("run.cfg"),
            "--steps",
            "60000",
            "--out",
            &s(&format!("{run}.csv")),
        ]);
        identical &= cli(&[
            "backtest",
            "--events",
            &s(&format!("{run}.csv")),
            "--technique",
            "ground-truth",
            "--config",
            &s("run.cfg"),
            "--out",
            &s(&format!("{run}_bt")),
        ]);
        identical &= cli(&[
            "compare",
            "--events",
            &s(&format!("{run}.csv")),
            "--config",
            &s("run.cfg"),
            "--seeds",
            "1,2",
            "--out",
            &s(&format!("{run}_cmp")),
        ]);
    }
    identical &= std::fs::read(d.join("a.csv")).unwrap() == std::fs::read(d.join("b.csv")).unwrap();
    identical &= read_tree(&d.join("a_bt")) == read_tree(&d.join("b_bt"));
    identical &= read_tree(&d.join("a_cmp")) == read_tree(&d.join("b_cmp"));
    let a = run_backtest(&umd, ground_truth_technique(), 300.0, 9).unwrap();
    let b = run_backtest(&umd, ground_truth_technique(), 300.0, 9).unwrap();
    identical &= a == b;
    outcome(
        round_trip && identical,
        format!(
            "event files round-trip bit for bit: {round_trip}; repeated simulate/backtest/compare outputs byte-identical: {identical}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form drift given fill", closed_form_drift),
        (
            "Monte Carlo matches theory, discrete model",
            monte_carlo_umd,
        ),
        (
            "Monte Carlo matches theory, Markov-Hawkes model",
            monte_carlo_gchp,
        ),
        ("negative drift for symmetric parameters", sign_theorems),
        ("calibration round trip", calibration_round_trip),
        ("exponential fill-rate estimator", lambda_estimator),
        ("fill technique comparison ordering", technique_ordering),
        ("exponential misfit of clustered fills", exponential_misfit),
        ("accounting invariants", accounting_invariants),
        (
            "determinism and serialization",
            determinism_and_serialization,
        ),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failures += !o.pass as usize;
        println!(
            "criterion {:>2} {} {name}: {} [{:.2?}]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
