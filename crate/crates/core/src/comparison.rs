//! Side-by-side runs of the fill techniques over one stream, each calibrated
//! from a ground-truth run on the same stream.

use alloc::vec::Vec;

use crate::calibration::{estimate_fill_rates, estimate_lambda_f, event_intervals};
use crate::engine::{run_backtest, BacktestReport};
use crate::fill_model::FillTechnique;
use crate::types::MarketEvent;
use crate::{Error, Result};

/// Technique parameters recovered from a ground-truth run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibratedTechniques {
    pub lambda_f: f64,
    pub r_f: f64,
    pub p_fill_down: f64,
}

impl CalibratedTechniques {
    /// Rate from the ground-truth fill times; per-event fill frequencies from
    /// its order lifecycle.
    pub fn from_ground_truth(events: &[MarketEvent], truth: &BacktestReport) -> Result<Self> {
        let lambda_f = estimate_lambda_f(&truth.fill_times())?.rate;
        let intervals = event_intervals(events, Some(&truth.lifecycle))?;
        let rates = estimate_fill_rates(&intervals);
        Ok(Self {
            lambda_f,
            r_f: rates.r_f?.value,
            p_fill_down: rates.p_fill_down?.value,
        })
    }

    pub fn techniques(&self) -> [FillTechnique; 3] {
        [
            FillTechnique::AlwaysFillOnTrade,
            FillTechnique::ExponentialFill {
                lambda_f: self.lambda_f,
            },
            FillTechnique::AdverseBernoulli {
                r_f: self.r_f,
                p_fill_down: self.p_fill_down,
            },
        ]
    }
}

/// One line of the orders-and-fills table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonRow {
    pub technique: &'static str,
    pub n_orders: u64,
    pub n_fills: u64,
    pub global_fill_rate: f64,
}

impl From<&BacktestReport> for ComparisonRow {
    fn from(r: &BacktestReport) -> Self {
        Self {
            technique: r.technique.name(),
            n_orders: r.n_orders,
            n_fills: r.n_fills,
            global_fill_rate: r.global_fill_rate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub calibrated: CalibratedTechniques,
    pub ground_truth: BacktestReport,
    /// Techniques 1, 2 and 3, in that order.
    pub techniques: [BacktestReport; 3],
}

impl Comparison {
    pub fn rows(&self) -> Vec<ComparisonRow> {
        self.techniques
            .iter()
            .chain(core::iter::once(&self.ground_truth))
            .map(ComparisonRow::from)
            .collect()
    }

    /// Windowed P&L RMS distance of each technique to the ground truth.
    pub fn pnl_distances(&self) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (d, r) in out.iter_mut().zip(&self.techniques) {
            *d = pnl_rms_distance(r, &self.ground_truth)?;
        }
        Ok(out)
    }
}

/// Runs the ground truth, calibrates the three techniques from it, then runs
/// each of them over the same events with the same seed.
pub fn run_comparison(
    events: &[MarketEvent],
    ground_truth: FillTechnique,
    window_s: f64,
    seed: u64,
) -> Result<Comparison> {
    if !matches!(ground_truth, FillTechnique::GroundTruth { .. }) {
        return Err(Error::InvalidParams(
            "comparison baseline must be the ground truth",
        ));
    }
    let truth = run_backtest(events, ground_truth, window_s, seed)?;
    let calibrated = CalibratedTechniques::from_ground_truth(events, &truth)?;
    let [t1, t2, t3] = calibrated.techniques();
    Ok(Comparison {
        calibrated,
        techniques: [
            run_backtest(events, t1, window_s, seed)?,
            run_backtest(events, t2, window_s, seed)?,
            run_backtest(events, t3, window_s, seed)?,
        ],
        ground_truth: truth,
    })
}

/// Root-mean-square gap between two windowed cumulative P&L series, in
/// half-tick·lots. Both runs must cover the same windows.
pub fn pnl_rms_distance(a: &BacktestReport, b: &BacktestReport) -> Result<f64> {
    if a.pnl_windows.len() != b.pnl_windows.len() || a.pnl_windows.is_empty() {
        return Err(Error::InvalidParams("P&L series cover different windows"));
    }
    let sum: f64 = a
        .pnl_windows
        .iter()
        .zip(&b.pnl_windows)
        .map(|(x, y)| {
            let d = (x.pnl - y.pnl) as f64;
            d * d
        })
        .sum();
    Ok(libm::sqrt(sum / a.pnl_windows.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{
        attach_trades, simulate_umd, HawkesParams, ModelParams, TradeFlowParams, DEFAULT_START_MID,
    };

    fn stream(n: usize, seed: u64) -> Vec<MarketEvent> {
        let m = ModelParams::new(0.01, 0.98, 0.01, 0.0, 1.0).unwrap();
        let mut events = simulate_umd(m, n, 0.1, DEFAULT_START_MID, seed).unwrap();
        attach_trades(&mut events, &TradeFlowParams::default(), seed);
        events
    }

    fn truth() -> FillTechnique {
        FillTechnique::GroundTruth {
            p_fill_down: 0.99,
            hawkes: HawkesParams::new(0.01, 0.3, 0.5).unwrap(),
        }
    }

    #[test]
    fn comparison_produces_four_rows() {
        let events = stream(50_000, 1);
        let c = run_comparison(&events, truth(), 300.0, 1).unwrap();
        let rows = c.rows();
        let names: Vec<_> = rows.iter().map(|r| r.technique).collect();
        assert_eq!(
            names,
            ["technique-1", "technique-2", "technique-3", "ground-truth"]
        );
        assert!((c.calibrated.p_fill_down - 0.99).abs() < 0.05);
        assert!(c.pnl_distances().unwrap().iter().all(|d| d.is_finite()));
    }

    #[test]
    fn rms_distance_to_self_is_zero() {
        let events = stream(5_000, 2);
        let r = run_backtest(&events, truth(), 300.0, 2).unwrap();
        assert_eq!(pnl_rms_distance(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn baseline_must_be_ground_truth() {
        let events = stream(100, 3);
        assert!(run_comparison(&events, FillTechnique::AlwaysFillOnTrade, 300.0, 3).is_err());
    }
}
