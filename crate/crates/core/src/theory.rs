//! Closed-form drift and fill probabilities for the up/middle/down model and
//! for the Markov-Hawkes (GCHP) model. All drifts are in ticks, buy side
//! unless stated otherwise.

use crate::market_model::{gchp_steady_state, GchpParams, ModelParams};
use crate::types::Side;
use crate::{Error, Result};

/// Expected mid move per event, `p_up - p_down`.
pub fn drift_unconditional(m: &ModelParams) -> Result<f64> {
    m.validate()?;
    Ok(m.p_up - m.p_down)
}

/// Probability that a resting buy order fills on a given event:
/// `p_fill_down * p_down + r_f * (p_mid + p_up)`.
pub fn fill_probability(m: &ModelParams) -> Result<f64> {
    m.validate()?;
    let p = m.p_fill_down * m.p_down + m.r_f * (m.p_mid + m.p_up);
    if p <= 0.0 {
        return Err(Error::DegenerateFill);
    }
    Ok(p)
}

/// Expected mid move on the event that fills a resting buy order,
/// `(r_f * p_up - p_fill_down * p_down) / P(f)`.
pub fn drift_given_fill(m: &ModelParams) -> Result<f64> {
    let p_fill = fill_probability(m)?;
    Ok((m.r_f * m.p_up - m.p_fill_down * m.p_down) / p_fill)
}

/// Conditional drift for either side. The sell side is the buy-side value of
/// the mirrored model, negated.
pub fn drift_given_fill_side(m: &ModelParams, side: Side) -> Result<f64> {
    match side {
        Side::Buy => drift_given_fill(m),
        Side::Sell => drift_given_fill(&m.mirror()).map(|d| -d),
    }
}

/// Expected move per event of the GCHP chain in steady state:
/// `Q(U)(p_uu - p_du) + Q(D)(p_ud - p_dd)`.
pub fn gchp_drift_unconditional(g: &GchpParams) -> Result<f64> {
    let (q_up, q_down) = gchp_steady_state(g)?;
    Ok(q_up * (g.p_uu - g.p_du) + q_down * (g.p_ud - g.p_dd))
}

fn check_rate(r_f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r_f) {
        return Err(Error::InvalidRate(r_f));
    }
    Ok(())
}

/// Buy-order fill probability per move under the GCHP chain.
pub fn gchp_fill_probability(g: &GchpParams, r_f: f64) -> Result<f64> {
    check_rate(r_f)?;
    let (q_up, q_down) = gchp_steady_state(g)?;
    Ok(q_up * (r_f * g.p_uu + g.p_du) + q_down * (r_f * g.p_ud + g.p_dd))
}

/// Expected move on the event that fills a resting buy order under GCHP.
pub fn gchp_drift_given_fill(g: &GchpParams, r_f: f64) -> Result<f64> {
    let p_fill = gchp_fill_probability(g, r_f)?;
    let (q_up, q_down) = gchp_steady_state(g)?;
    let numerator = q_up * (r_f * g.p_uu - g.p_du) + q_down * (r_f * g.p_ud - g.p_dd);
    Ok(numerator / p_fill)
}

/// The three headline numbers of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftReport {
    pub drift_unconditional_ticks: f64,
    pub fill_probability: f64,
    pub drift_given_fill_ticks: f64,
}

impl DriftReport {
    pub fn umd(m: &ModelParams) -> Result<Self> {
        Ok(Self {
            drift_unconditional_ticks: drift_unconditional(m)?,
            fill_probability: fill_probability(m)?,
            drift_given_fill_ticks: drift_given_fill(m)?,
        })
    }

    pub fn gchp(g: &GchpParams, r_f: f64) -> Result<Self> {
        Ok(Self {
            drift_unconditional_ticks: gchp_drift_unconditional(g)?,
            fill_probability: gchp_fill_probability(g, r_f)?,
            drift_given_fill_ticks: gchp_drift_given_fill(g, r_f)?,
        })
    }
}
