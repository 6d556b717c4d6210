//! Fill-decision engines for resting at-the-touch orders.
//!
//! Three backtest techniques plus the synthetic ground truth:
//!
//! | technique            | fills when                                             | adverse |
//! |----------------------|--------------------------------------------------------|---------|
//! | `AlwaysFillOnTrade`  | the event carries an opposing market order             | never   |
//! | `ExponentialFill`    | an opposing trade's gap since the previous opposing trade is at least the order's Exp(lambda_f) draw | never |
//! | `AdverseBernoulli`   | the price moves through the order (prob `p_fill_down`), else Bernoulli(`r_f`) per event | yes |
//! | `GroundTruth`        | the price moves through the order (prob `p_fill_down`), else a Hawkes fill opportunity elapses | yes |

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::market_model::{exp_draw, seeded, HawkesParams, HawkesSampler};
use crate::stats::MeanEstimate;
use crate::types::{MarketEvent, MoveDirection, OrderId, Price, Side, VirtualOrder};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FillTechnique {
    AlwaysFillOnTrade,
    ExponentialFill {
        lambda_f: f64,
    },
    AdverseBernoulli {
        r_f: f64,
        p_fill_down: f64,
    },
    GroundTruth {
        p_fill_down: f64,
        hawkes: HawkesParams,
    },
}

impl FillTechnique {
    pub fn validate(&self) -> Result<()> {
        let check_down = |p: f64| {
            if p > 0.0 && p <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams("p_fill_down must lie in (0, 1]"))
            }
        };
        match *self {
            FillTechnique::AlwaysFillOnTrade => Ok(()),
            FillTechnique::ExponentialFill { lambda_f } => {
                if lambda_f.is_finite() && lambda_f > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParams("lambda_f must be positive"))
                }
            }
            FillTechnique::AdverseBernoulli { r_f, p_fill_down } => {
                if !(0.0..1.0).contains(&r_f) {
                    return Err(Error::InvalidRate(r_f));
                }
                check_down(p_fill_down)
            }
            FillTechnique::GroundTruth {
                p_fill_down,
                hawkes,
            } => {
                check_down(p_fill_down)?;
                hawkes.validate()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FillTechnique::AlwaysFillOnTrade => "technique-1",
            FillTechnique::ExponentialFill { .. } => "technique-2",
            FillTechnique::AdverseBernoulli { .. } => "technique-3",
            FillTechnique::GroundTruth { .. } => "ground-truth",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FillDecision {
    pub filled: bool,
    pub adverse: bool,
    pub fill_price: Option<Price>,
}

impl FillDecision {
    pub const NONE: FillDecision = FillDecision {
        filled: false,
        adverse: false,
        fill_price: None,
    };

    fn fill(order: &VirtualOrder, adverse: bool) -> Self {
        Self {
            filled: true,
            adverse,
            fill_price: Some(order.price),
        }
    }
}

/// True when `event` moved the touch through a resting order: a buy whose
/// price became (at least) the new best ask on a down move, or the mirror.
pub fn adverse_move_hits(order: &VirtualOrder, event: &MarketEvent) -> bool {
    match order.side {
        Side::Buy => event.direction == MoveDirection::Down && event.best_ask <= order.price,
        Side::Sell => event.direction == MoveDirection::Up && event.best_bid >= order.price,
    }
}

/// Stateful fill engine for one backtest run.
///
/// For every stream event the caller asks [`decide_fill`](Self::decide_fill)
/// for each working order (at most one per side) and then calls
/// [`observe`](Self::observe) once.
#[derive(Clone, Debug)]
pub struct FillSimulator {
    technique: FillTechnique,
    rng: ChaCha8Rng,
    // Time of the last trade per aggressor side.
    last_trade_s: [Option<f64>; 2],
    // Exponential threshold drawn for the working order on each side.
    pending_draw: [Option<(OrderId, f64)>; 2],
    // Fill-opportunity clocks per order side.
    opportunities: Option<[HawkesSampler; 2]>,
    next_opportunity_s: [f64; 2],
}

impl FillSimulator {
    pub fn new(technique: FillTechnique, seed: u64) -> Result<Self> {
        technique.validate()?;
        let (opportunities, next_opportunity_s) = match technique {
            FillTechnique::GroundTruth { hawkes, .. } => {
                let mut clocks = [
                    HawkesSampler::from_rng(hawkes, seeded(seed, 11)),
                    HawkesSampler::from_rng(hawkes, seeded(seed, 12)),
                ];
                let next = [clocks[0].next_time(), clocks[1].next_time()];
                (Some(clocks), next)
            }
            _ => (None, [f64::INFINITY; 2]),
        };
        Ok(Self {
            technique,
            rng: seeded(seed, 10),
            last_trade_s: [None; 2],
            pending_draw: [None; 2],
            opportunities,
            next_opportunity_s,
        })
    }

    pub fn technique(&self) -> &FillTechnique {
        &self.technique
    }

    /// Decides whether `order` fills on `event`, the next event after the
    /// order started working.
    pub fn decide_fill(&mut self, order: &VirtualOrder, event: &MarketEvent) -> FillDecision {
        if !order.is_working() {
            return FillDecision::NONE;
        }
        match self.technique {
            FillTechnique::AlwaysFillOnTrade => match event.trade {
                Some(t) if t.aggressor.opposes(order.side) => FillDecision::fill(order, false),
                _ => FillDecision::NONE,
            },
            FillTechnique::ExponentialFill { lambda_f } => {
                let Some(trade) = event.trade.filter(|t| t.aggressor.opposes(order.side)) else {
                    return FillDecision::NONE;
                };
                let slot = order.side.index();
                let threshold = match self.pending_draw[slot] {
                    Some((id, draw)) if id == order.id => draw,
                    _ => {
                        let draw = exp_draw(&mut self.rng, lambda_f);
                        self.pending_draw[slot] = Some((order.id, draw));
                        draw
                    }
                };
                let since = self.last_trade_s[trade.aggressor.index()].unwrap_or(0.0);
                if event.time_s - since >= threshold {
                    self.pending_draw[slot] = None;
                    FillDecision::fill(order, false)
                } else {
                    FillDecision::NONE
                }
            }
            FillTechnique::AdverseBernoulli { r_f, p_fill_down } => {
                if adverse_move_hits(order, event) {
                    if self.rng.random::<f64>() < p_fill_down {
                        FillDecision::fill(order, true)
                    } else {
                        FillDecision::NONE
                    }
                } else if self.rng.random::<f64>() < r_f {
                    FillDecision::fill(order, false)
                } else {
                    FillDecision::NONE
                }
            }
            FillTechnique::GroundTruth { p_fill_down, .. } => {
                if adverse_move_hits(order, event) {
                    if self.rng.random::<f64>() < p_fill_down {
                        FillDecision::fill(order, true)
                    } else {
                        FillDecision::NONE
                    }
                } else if self.next_opportunity_s[order.side.index()] <= event.time_s {
                    self.consume_opportunities(order.side.index(), event.time_s);
                    FillDecision::fill(order, false)
                } else {
                    FillDecision::NONE
                }
            }
        }
    }

    /// End-of-event bookkeeping: trade clocks and lapsed fill opportunities.
    pub fn observe(&mut self, event: &MarketEvent) {
        for slot in self.last_trade_s.iter_mut() {
            slot.get_or_insert(event.time_s);
        }
        if let Some(t) = event.trade {
            self.last_trade_s[t.aggressor.index()] = Some(event.time_s);
        }
        if self.opportunities.is_some() {
            self.consume_opportunities(0, event.time_s);
            self.consume_opportunities(1, event.time_s);
        }
    }

    /// Drops per-order state of a filled or canceled order.
    pub fn forget(&mut self, order: OrderId) {
        for slot in self.pending_draw.iter_mut() {
            if matches!(slot, Some((id, _)) if *id == order) {
                *slot = None;
            }
        }
    }

    fn consume_opportunities(&mut self, slot: usize, now: f64) {
        if let Some(clocks) = self.opportunities.as_mut() {
            while self.next_opportunity_s[slot] <= now {
                self.next_opportunity_s[slot] = clocks[slot].next_time();
            }
        }
    }
}

/// Conditional drift of the move that fills a resting order.
///
/// At every event after the first, a fresh one-lot order sits at the pre-move
/// touch of `side`; when the technique fills it, the event's mid change (in
/// ticks) is sampled. Unlike the strategy, the probe is always in the market,
/// so the estimate targets the stationary conditional expectation.
pub fn probe_conditional_drift(
    events: &[MarketEvent],
    technique: FillTechnique,
    side: Side,
    seed: u64,
) -> Result<MeanEstimate> {
    let samples = probe_fill_moves(events, technique, side, seed)?;
    MeanEstimate::from_samples(&samples).ok_or(Error::InsufficientData("probe order never filled"))
}

/// The per-fill moves behind [`probe_conditional_drift`], in stream order.
pub fn probe_fill_moves(
    events: &[MarketEvent],
    technique: FillTechnique,
    side: Side,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut sim = FillSimulator::new(technique, seed)?;
    let mut moves = Vec::new();
    let Some(first) = events.first() else {
        return Err(Error::EmptyStream);
    };
    sim.observe(first);
    for (k, pair) in events.windows(2).enumerate() {
        let (before, event) = (&pair[0], &pair[1]);
        let order = VirtualOrder::at_touch(OrderId(k as u64), side, before);
        let decision = sim.decide_fill(&order, event);
        sim.forget(order.id);
        sim.observe(event);
        if decision.filled {
            let (Some(m0), Some(m1)) = (before.mid_lenient(), event.mid_lenient()) else {
                return Err(Error::MalformedStream {
                    seq: event.seq,
                    reason: "mid not on the half-tick lattice",
                });
            };
            moves.push(m0.ticks_to(m1));
        }
    }
    Ok(moves)
}

/// Fill times a technique produces for probe orders; handy for rate checks.
pub fn probe_fill_times(
    events: &[MarketEvent],
    technique: FillTechnique,
    side: Side,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut sim = FillSimulator::new(technique, seed)?;
    let mut times = Vec::new();
    let Some(first) = events.first() else {
        return Err(Error::EmptyStream);
    };
    sim.observe(first);
    let mut order = VirtualOrder::at_touch(OrderId(0), side, first);
    for event in &events[1..] {
        if sim.decide_fill(&order, event).filled {
            times.push(event.time_s);
            sim.forget(order.id);
            order = VirtualOrder::at_touch(OrderId(order.id.0 + 1), side, event);
        } else {
            order.price = event.touch(side);
        }
        sim.observe(event);
    }
    Ok(times)
}
