//! Deterministic event-loop backtester.
//!
//! Per event, in order:
//! 1. the event's move is applied to the book;
//! 2. every order working before the event is offered to the fill engine;
//! 3. at most one fill is applied (adverse before non-adverse, then buy before
//!    sell); a losing fill decision is discarded and its order keeps working;
//! 4. the strategy re-quotes; new orders work from the next event on.
//!
//! Cash is kept in integer half-tick·lot units so the identity
//! `pnl = cash + position * mid` holds exactly at every event.

use alloc::vec::Vec;

use rand::Rng;

use crate::fill_model::{FillDecision, FillSimulator, FillTechnique};
use crate::market_model::seeded;
use crate::stats::{MeanAccumulator, MeanEstimate};
use crate::strategy::{apply_fill, desired_quotes, MakerState, RestingQuote, SideAction};
use crate::types::{FillRecord, MarketEvent, OrderId, Price, Side, VirtualOrder};
use crate::{Error, Result};

/// P&L aggregation window used for reporting, in seconds.
pub const DEFAULT_PNL_WINDOW_S: f64 = 300.0;

/// Forward horizon of the fill-drift measurement, in events.
pub const DEFAULT_DRIFT_WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LifecycleKind {
    Added,
    Canceled,
    Filled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifecycleEvent {
    pub kind: LifecycleKind,
    pub order_id: OrderId,
    pub seq: u64,
    pub time_s: f64,
    pub price: Price,
    pub side: Side,
}

/// Cumulative mark-to-market P&L at the end of a window, in half-tick·lots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PnlWindow {
    pub index: u64,
    pub end_time_s: f64,
    pub pnl: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestReport {
    pub technique: FillTechnique,
    pub seed: u64,
    pub window_s: f64,
    pub n_events: usize,
    pub n_orders: u64,
    pub n_fills: u64,
    /// Fill decisions dropped because the other side filled on the same event.
    pub discarded_fills: u64,
    /// Events whose spread was wider than one tick.
    pub wide_spread_events: u64,
    pub lifecycle: Vec<LifecycleEvent>,
    pub fills: Vec<FillRecord>,
    /// Mark-to-market P&L after every event, half-tick·lots.
    pub pnl_series: Vec<i64>,
    pub position_series: Vec<i8>,
    pub pnl_windows: Vec<PnlWindow>,
    pub final_cash: i64,
    pub final_position: i8,
    pub final_mid: Price,
}

impl BacktestReport {
    pub fn global_fill_rate(&self) -> f64 {
        if self.n_orders == 0 {
            0.0
        } else {
            self.n_fills as f64 / self.n_orders as f64
        }
    }

    pub fn final_pnl(&self) -> i64 {
        mark_to_market(self.final_cash, self.final_position, self.final_mid)
    }

    pub fn fill_times(&self) -> Vec<f64> {
        self.fills.iter().map(|f| f.time_s).collect()
    }

    /// Per-window P&L changes; they sum to the final P&L.
    pub fn window_increments(&self) -> Vec<i64> {
        let mut prev = 0;
        self.pnl_windows
            .iter()
            .map(|w| {
                let d = w.pnl - prev;
                prev = w.pnl;
                d
            })
            .collect()
    }
}

/// `cash + position * mid`, all in half-ticks.
pub fn mark_to_market(cash: i64, position: i8, mid: Price) -> i64 {
    cash + position as i64 * mid.0
}

fn validate_stream(events: &[MarketEvent]) -> Result<u64> {
    let mut wide = 0;
    let mut prev: Option<&MarketEvent> = None;
    for e in events {
        let malformed = |reason| Error::MalformedStream { seq: e.seq, reason };
        if !(e.time_s.is_finite() && e.time_s >= 0.0) {
            return Err(malformed("time must be finite and non-negative"));
        }
        if let Some(p) = prev {
            if e.seq <= p.seq {
                return Err(malformed("seq must increase"));
            }
            if e.time_s < p.time_s {
                return Err(malformed("time must not decrease"));
            }
        }
        if e.mid_lenient().is_none() {
            return Err(malformed("spread must be positive with a lattice mid"));
        }
        if e.spread() != 2 {
            wide += 1;
        }
        prev = Some(e);
    }
    Ok(wide)
}

struct Book {
    state: MakerState,
    orders: [Option<VirtualOrder>; 2],
    next_id: u64,
    lifecycle: Vec<LifecycleEvent>,
    n_orders: u64,
}

impl Book {
    fn log(&mut self, kind: LifecycleKind, order: &VirtualOrder, event: &MarketEvent) {
        self.lifecycle.push(LifecycleEvent {
            kind,
            order_id: order.id,
            seq: event.seq,
            time_s: event.time_s,
            price: order.price,
            side: order.side,
        });
    }

    fn cancel(&mut self, side: Side, event: &MarketEvent, sim: &mut FillSimulator) -> Result<()> {
        if let Some(mut order) = self.orders[side.index()].take() {
            order.cancel()?;
            sim.forget(order.id);
            self.log(LifecycleKind::Canceled, &order, event);
        }
        self.state.set_working(side, None);
        Ok(())
    }

    fn post(&mut self, side: Side, price: Price, event: &MarketEvent) {
        let order = VirtualOrder {
            id: OrderId(self.next_id),
            side,
            price,
            qty: 1,
            created_seq: event.seq,
            state: crate::types::OrderState::Working,
        };
        self.next_id += 1;
        self.n_orders += 1;
        self.log(LifecycleKind::Added, &order, event);
        self.orders[side.index()] = Some(order);
        self.state.set_working(
            side,
            Some(RestingQuote {
                id: order.id,
                price,
            }),
        );
    }

    fn requote(&mut self, event: &MarketEvent, sim: &mut FillSimulator) -> Result<()> {
        let instruction = desired_quotes(&self.state, event);
        for side in [Side::Buy, Side::Sell] {
            match instruction.side(side) {
                SideAction::Idle | SideAction::Keep => {}
                SideAction::Post(p) => self.post(side, p, event),
                SideAction::Cancel => self.cancel(side, event, sim)?,
                SideAction::Replace(p) => {
                    self.cancel(side, event, sim)?;
                    self.post(side, p, event);
                }
            }
        }
        Ok(())
    }
}

/// Which of two same-event fill decisions wins.
fn pick_fill(decisions: &[Option<FillDecision>; 2]) -> Option<Side> {
    match (decisions[0], decisions[1]) {
        (Some(buy), Some(sell)) if sell.adverse && !buy.adverse => Some(Side::Sell),
        (Some(_), _) => Some(Side::Buy),
        (None, Some(_)) => Some(Side::Sell),
        (None, None) => None,
    }
}

/// Runs the naive market maker over `events` with the given fill technique.
pub fn run_backtest(
    events: &[MarketEvent],
    technique: FillTechnique,
    window_s: f64,
    seed: u64,
) -> Result<BacktestReport> {
    if events.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::InvalidParams("P&L window must be positive"));
    }
    let wide_spread_events = validate_stream(events)?;
    let mut sim = FillSimulator::new(technique, seed)?;
    let mut book = Book {
        state: MakerState::default(),
        orders: [None; 2],
        next_id: 0,
        lifecycle: Vec::new(),
        n_orders: 0,
    };
    let mut fills = Vec::new();
    let mut discarded_fills = 0;
    let mut cash: i64 = 0;
    let mut pnl_series = Vec::with_capacity(events.len());
    let mut position_series = Vec::with_capacity(events.len());
    let mut windows = WindowAccumulator::new(events[0].time_s, window_s);

    for (k, event) in events.iter().enumerate() {
        // Mid validity was checked above.
        let mid = event.mid_lenient().unwrap_or_default();
        if k > 0 {
            let mut decisions = [None; 2];
            for side in [Side::Buy, Side::Sell] {
                if let Some(order) = &book.orders[side.index()] {
                    let d = sim.decide_fill(order, event);
                    if d.filled {
                        decisions[side.index()] = Some(d);
                    }
                }
            }
            if decisions.iter().all(Option::is_some) {
                discarded_fills += 1;
            }
            if let Some(side) = pick_fill(&decisions) {
                let decision = decisions[side.index()].unwrap_or(FillDecision::NONE);
                if let Some(mut order) = book.orders[side.index()].take() {
                    order.fill()?;
                    let record = FillRecord {
                        order_id: order.id,
                        side,
                        fill_seq: event.seq,
                        time_s: event.time_s,
                        fill_price: order.price,
                        mid_at_fill: mid,
                        adverse: decision.adverse,
                    };
                    book.state = apply_fill(&book.state, &record)?;
                    cash -= side.sign() * order.price.0 * order.qty as i64;
                    sim.forget(order.id);
                    book.log(LifecycleKind::Filled, &order, event);
                    fills.push(record);
                }
            }
        }
        sim.observe(event);
        if k + 1 < events.len() {
            book.requote(event, &mut sim)?;
        }
        let pnl = mark_to_market(cash, book.state.position, mid);
        pnl_series.push(pnl);
        position_series.push(book.state.position);
        windows.push(event.time_s, pnl);
    }

    let last = events[events.len() - 1];
    for side in [Side::Buy, Side::Sell] {
        book.cancel(side, &last, &mut sim)?;
    }

    Ok(BacktestReport {
        technique,
        seed,
        window_s,
        n_events: events.len(),
        n_orders: book.n_orders,
        n_fills: fills.len() as u64,
        discarded_fills,
        wide_spread_events,
        lifecycle: book.lifecycle,
        fills,
        pnl_series,
        position_series,
        pnl_windows: windows.finish(),
        final_cash: cash,
        final_position: book.state.position,
        final_mid: last.mid_lenient().unwrap_or_default(),
    })
}

struct WindowAccumulator {
    start_s: f64,
    width_s: f64,
    current: u64,
    last_pnl: i64,
    out: Vec<PnlWindow>,
}

impl WindowAccumulator {
    fn new(start_s: f64, width_s: f64) -> Self {
        Self {
            start_s,
            width_s,
            current: 0,
            last_pnl: 0,
            out: Vec::new(),
        }
    }

    fn close(&mut self, index: u64) {
        self.out.push(PnlWindow {
            index,
            end_time_s: self.start_s + (index + 1) as f64 * self.width_s,
            pnl: self.last_pnl,
        });
    }

    fn push(&mut self, t: f64, pnl: i64) {
        let index = libm::floor((t - self.start_s) / self.width_s) as u64;
        while self.current < index {
            self.close(self.current);
            self.current += 1;
        }
        self.last_pnl = pnl;
    }

    fn finish(mut self) -> Vec<PnlWindow> {
        self.close(self.current);
        self.out
    }
}

/// Forward mid moves after a set of anchor events, in half-ticks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriftSample {
    pub moves_half_ticks: Vec<i64>,
}

impl DriftSample {
    pub fn len(&self) -> usize {
        self.moves_half_ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves_half_ticks.is_empty()
    }

    pub fn ticks(&self) -> impl Iterator<Item = f64> + '_ {
        self.moves_half_ticks.iter().map(|&h| h as f64 / 2.0)
    }

    pub fn estimate(&self) -> Option<MeanEstimate> {
        let mut acc = MeanAccumulator::default();
        acc.extend(self.ticks());
        acc.estimate()
    }

    /// Counts per distinct move size, ascending.
    pub fn histogram(&self) -> Vec<(i64, u64)> {
        let mut sorted = self.moves_half_ticks.clone();
        sorted.sort_unstable();
        let mut out: Vec<(i64, u64)> = Vec::new();
        for h in sorted {
            match out.last_mut() {
                Some((v, c)) if *v == h => *c += 1,
                _ => out.push((h, 1)),
            }
        }
        out
    }

    /// Running sum in ticks.
    pub fn cumulative_ticks(&self) -> Vec<f64> {
        self.ticks()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }
}

/// Mid moves following fills, split by side, with a random-time control.
#[derive(Clone, Debug, PartialEq)]
pub struct FillDriftAnalysis {
    pub window_events: usize,
    pub buy: DriftSample,
    pub sell: DriftSample,
    pub control: DriftSample,
}

impl FillDriftAnalysis {
    /// Buy moves and negated sell moves, in ticks: negative means the price
    /// went against the filled order.
    pub fn pooled_against_order(&self) -> Option<MeanEstimate> {
        let mut acc = MeanAccumulator::default();
        acc.extend(self.buy.ticks());
        acc.extend(self.sell.ticks().map(|x| -x));
        acc.estimate()
    }
}

fn index_of_seq(events: &[MarketEvent], seq: u64) -> Option<usize> {
    events.binary_search_by_key(&seq, |e| e.seq).ok()
}

/// Mid change from just before `index` to `window` events later, clamped at
/// the stream end. The window includes the anchor event's own move.
fn forward_move(events: &[MarketEvent], index: usize, window: usize) -> Option<i64> {
    let start = index.checked_sub(1)?;
    let end = (start + window).min(events.len() - 1);
    Some(events[end].mid_lenient()?.0 - events[start].mid_lenient()?.0)
}

/// Mid moves over `window_events` events starting with each fill's event.
///
/// The control sample draws the same number of anchors uniformly from the
/// stream (size of the larger side sample).
pub fn drift_after_fills(
    fills: &[FillRecord],
    events: &[MarketEvent],
    window_events: usize,
    seed: u64,
) -> Result<FillDriftAnalysis> {
    if fills.is_empty() {
        return Err(Error::InsufficientData("no fills"));
    }
    if window_events == 0 {
        return Err(Error::InvalidParams(
            "drift window must be at least one event",
        ));
    }
    if events.len() < 2 {
        return Err(Error::EmptyStream);
    }
    let mut buy = DriftSample::default();
    let mut sell = DriftSample::default();
    for fill in fills {
        let index = index_of_seq(events, fill.fill_seq).ok_or(Error::MalformedStream {
            seq: fill.fill_seq,
            reason: "fill does not match any event",
        })?;
        let mv = forward_move(events, index, window_events).ok_or(Error::MalformedStream {
            seq: fill.fill_seq,
            reason: "fill on first event or off-lattice mid",
        })?;
        match fill.side {
            Side::Buy => buy.moves_half_ticks.push(mv),
            Side::Sell => sell.moves_half_ticks.push(mv),
        }
    }
    let mut rng = seeded(seed, 21);
    let n_control = buy.len().max(sell.len());
    let mut control = DriftSample::default();
    for _ in 0..n_control {
        let index = rng.random_range(1..events.len());
        if let Some(mv) = forward_move(events, index, window_events) {
            control.moves_half_ticks.push(mv);
        }
    }
    Ok(FillDriftAnalysis {
        window_events,
        buy,
        sell,
        control,
    })
}
