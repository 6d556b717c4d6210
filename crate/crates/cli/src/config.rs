//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use touchdrift_core::engine::{DEFAULT_DRIFT_WINDOW, DEFAULT_PNL_WINDOW_S};
use touchdrift_core::fill_model::FillTechnique;
use touchdrift_core::market_model::{
    GchpParams, HawkesParams, ModelParams, TradeFlowParams, DEFAULT_START_MID,
};
use touchdrift_core::{MoveDirection, Price, TickGrid};

use crate::error::{read_to_string, CliError, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "tick_size",
    "p_up",
    "p_mid",
    "p_down",
    "r_f",
    "p_fill_down",
    "p_uu",
    "p_du",
    "p_ud",
    "p_dd",
    "hawkes_mu",
    "hawkes_alpha",
    "hawkes_beta",
    "start_state",
    "start_mid",
    "dt_s",
    "p_trade_on_mid",
    "lambda_f",
    "fill_hawkes_mu",
    "fill_hawkes_alpha",
    "fill_hawkes_beta",
    "seed",
    "resample_interval_s",
    "drift_window",
    "pnl_window_s",
];

/// Which fill technique a backtest uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TechniqueKind {
    AlwaysFillOnTrade,
    Exponential,
    AdverseBernoulli,
    GroundTruth,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, (usize, String)>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Config {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if values
                .insert(key.to_string(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Config {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| CliError::Config {
                line: *line,
                message: format!("`{key}` has an invalid value `{v}`"),
            }),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn require_f64(&self, key: &'static str) -> Result<f64> {
        self.parsed(key)?.ok_or(CliError::MissingKey(key))
    }

    pub fn grid(&self) -> Result<TickGrid> {
        match self.parsed::<f64>("tick_size")? {
            Some(t) => Ok(TickGrid::new(t)?),
            None => Ok(TickGrid::TEN_YEAR_NOTE),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.parsed("seed")?.unwrap_or(0))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(
            self.require_f64("p_up")?,
            self.require_f64("p_mid")?,
            self.require_f64("p_down")?,
            self.f64_or("r_f", 0.0)?,
            self.f64_or("p_fill_down", 1.0)?,
        )?)
    }

    pub fn r_f(&self) -> Result<f64> {
        self.f64_or("r_f", 0.0)
    }

    pub fn has_gchp(&self) -> bool {
        ["p_uu", "p_du", "p_ud", "p_dd"]
            .iter()
            .all(|k| self.contains(k))
    }

    pub fn gchp_params(&self) -> Result<GchpParams> {
        let hawkes = HawkesParams::new(
            self.f64_or("hawkes_mu", 1.0)?,
            self.f64_or("hawkes_alpha", 0.0)?,
            self.f64_or("hawkes_beta", 1.0)?,
        )?;
        Ok(GchpParams::new(
            self.require_f64("p_uu")?,
            self.require_f64("p_du")?,
            self.require_f64("p_ud")?,
            self.require_f64("p_dd")?,
            hawkes,
        )?)
    }

    pub fn gchp_start_state(&self) -> Result<MoveDirection> {
        match self.values.get("start_state") {
            None => Ok(MoveDirection::Up),
            Some((_, v)) if v == "U" => Ok(MoveDirection::Up),
            Some((_, v)) if v == "D" => Ok(MoveDirection::Down),
            Some((line, v)) => Err(CliError::Config {
                line: *line,
                message: format!("start_state must be U or D, found `{v}`"),
            }),
        }
    }

    pub fn start_mid(&self, grid: TickGrid) -> Result<Price> {
        match self.parsed::<f64>("start_mid")? {
            Some(p) => Ok(grid.to_internal(p)?),
            None => Ok(DEFAULT_START_MID),
        }
    }

    pub fn dt_s(&self) -> Result<f64> {
        self.f64_or("dt_s", 1.0)
    }

    pub fn trade_flow(&self) -> Result<TradeFlowParams> {
        Ok(TradeFlowParams {
            p_trade_on_mid: self
                .f64_or("p_trade_on_mid", TradeFlowParams::DEFAULT_P_TRADE_ON_MID)?,
        })
    }

    pub fn resample_interval_s(&self) -> Result<f64> {
        self.f64_or("resample_interval_s", 1.0)
    }

    pub fn drift_window(&self) -> Result<usize> {
        Ok(self.parsed("drift_window")?.unwrap_or(DEFAULT_DRIFT_WINDOW))
    }

    pub fn pnl_window_s(&self) -> Result<f64> {
        self.f64_or("pnl_window_s", DEFAULT_PNL_WINDOW_S)
    }

    pub fn ground_truth(&self) -> Result<FillTechnique> {
        let hawkes = HawkesParams::new(
            self.require_f64("fill_hawkes_mu")?,
            self.f64_or("fill_hawkes_alpha", 0.0)?,
            self.f64_or("fill_hawkes_beta", 1.0)?,
        )?;
        let t = FillTechnique::GroundTruth {
            p_fill_down: self.f64_or("p_fill_down", 0.99)?,
            hawkes,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn technique(&self, kind: TechniqueKind) -> Result<FillTechnique> {
        let t = match kind {
            TechniqueKind::AlwaysFillOnTrade => FillTechnique::AlwaysFillOnTrade,
            TechniqueKind::Exponential => FillTechnique::ExponentialFill {
                lambda_f: self.require_f64("lambda_f")?,
            },
            TechniqueKind::AdverseBernoulli => FillTechnique::AdverseBernoulli {
                r_f: self.require_f64("r_f")?,
                p_fill_down: self.f64_or("p_fill_down", 1.0)?,
            },
            TechniqueKind::GroundTruth => return self.ground_truth(),
        };
        t.validate()?;
        Ok(t)
    }
}
