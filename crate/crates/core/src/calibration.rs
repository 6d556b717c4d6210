//! Parameter estimation from event streams: fixed-interval resampling,
//! move and fill frequencies, the exponential fill rate, and the empirical
//! drift on fill events.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{drift_after_fills, BacktestReport, LifecycleEvent, LifecycleKind};
use crate::market_model::{exp_draw, seeded, ModelParams};
use crate::stats::{histogram, ks_one_sample, ks_two_sample, KsTest, MeanEstimate, Proportion};
use crate::theory::drift_given_fill;
use crate::types::{MarketEvent, MoveDirection, Price, Side};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampledInterval {
    pub t_index: u64,
    pub last_bid: Price,
    pub last_ask: Price,
    pub last_mid: Price,
    /// Mid change against the previous interval, in half-ticks.
    pub mid_change: i64,
    pub direction: MoveDirection,
    pub active_buy: bool,
    pub active_sell: bool,
    pub filled_buy: bool,
    pub filled_sell: bool,
}

impl ResampledInterval {
    pub fn active(&self, side: Side) -> bool {
        match side {
            Side::Buy => self.active_buy,
            Side::Sell => self.active_sell,
        }
    }

    pub fn filled(&self, side: Side) -> bool {
        match side {
            Side::Buy => self.filled_buy,
            Side::Sell => self.filled_sell,
        }
    }

    /// More than one tick in either direction.
    pub fn is_multi_tick(&self) -> bool {
        self.mid_change.abs() > 2
    }
}

#[derive(Clone, Copy, Debug)]
struct OrderSpan {
    added: u64,
    terminal: u64,
}

/// Per-side order spans in the order they were added.
fn order_spans(lifecycle: &[LifecycleEvent]) -> [Vec<OrderSpan>; 2] {
    let mut by_id: BTreeMap<u64, (Side, OrderSpan)> = BTreeMap::new();
    for l in lifecycle {
        match l.kind {
            LifecycleKind::Added => {
                by_id.insert(
                    l.order_id.0,
                    (
                        l.side,
                        OrderSpan {
                            added: l.seq,
                            terminal: u64::MAX,
                        },
                    ),
                );
            }
            LifecycleKind::Canceled | LifecycleKind::Filled => {
                if let Some((_, span)) = by_id.get_mut(&l.order_id.0) {
                    span.terminal = span.terminal.min(l.seq);
                }
            }
        }
    }
    let mut spans: [Vec<OrderSpan>; 2] = [Vec::new(), Vec::new()];
    for (side, span) in by_id.into_values() {
        spans[side.index()].push(span);
    }
    for s in &mut spans {
        s.sort_by_key(|span| span.added);
    }
    spans
}

/// Sweeps one side's spans with a monotone probe point in doubled seq units.
/// At `2 * seq` the question is "was an order offered a fill at this event",
/// at `2 * seq + 1` it is "is an order working after this event".
struct ActivityCursor<'a> {
    spans: &'a [OrderSpan],
    next: usize,
    latest_terminal: u64,
}

impl<'a> ActivityCursor<'a> {
    fn new(spans: &'a [OrderSpan]) -> Self {
        Self {
            spans,
            next: 0,
            latest_terminal: 0,
        }
    }

    fn active_at(&mut self, doubled: u64) -> bool {
        while self.next < self.spans.len() && 2 * self.spans[self.next].added < doubled {
            let t = self.spans[self.next].terminal;
            self.latest_terminal = self.latest_terminal.max(t.saturating_mul(2));
            self.next += 1;
        }
        self.next > 0 && doubled <= self.latest_terminal
    }
}

fn fill_indices(events: &[MarketEvent], lifecycle: &[LifecycleEvent]) -> [Vec<usize>; 2] {
    let mut out: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for l in lifecycle.iter().filter(|l| l.kind == LifecycleKind::Filled) {
        if let Ok(k) = events.binary_search_by_key(&l.seq, |e| e.seq) {
            out[l.side.index()].push(k);
        }
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

fn lattice_mid(event: &MarketEvent) -> Result<Price> {
    event.mid_lenient().ok_or(Error::MalformedStream {
        seq: event.seq,
        reason: "mid not on the half-tick lattice",
    })
}

/// Aggregates events into fixed intervals of `interval_s` seconds.
///
/// Each interval reports the last book state seen so far; intervals without
/// events carry the previous state with a Middle move. An interval is active
/// on a side when an order on that side was offered a fill at any of its
/// events (or, without events, when one was working). Fill flags attribute a
/// fill to the interval of its event. Without a lifecycle every flag is false.
pub fn resample(
    events: &[MarketEvent],
    lifecycle: Option<&[LifecycleEvent]>,
    interval_s: f64,
) -> Result<Vec<ResampledInterval>> {
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(Error::InvalidParams("resample interval must be positive"));
    }
    let Some(first) = events.first() else {
        return Err(Error::EmptyStream);
    };
    for pair in events.windows(2) {
        if pair[1].time_s < pair[0].time_s || pair[1].seq <= pair[0].seq {
            return Err(Error::MalformedStream {
                seq: pair[1].seq,
                reason: "events out of order",
            });
        }
    }
    let spans = lifecycle.map(order_spans).unwrap_or_default();
    let fills = lifecycle
        .map(|l| fill_indices(events, l))
        .unwrap_or_default();
    let mut cursors = [
        ActivityCursor::new(&spans[0]),
        ActivityCursor::new(&spans[1]),
    ];
    let mut fill_ptr = [0usize; 2];

    let origin = libm::floor(first.time_s / interval_s) * interval_s;
    let last_t = events[events.len() - 1].time_s;
    let n_intervals = libm::floor((last_t - origin) / interval_s) as u64 + 1;
    let mut prev_mid = Price(lattice_mid(first)?.0 - 2 * first.direction.ticks());
    let mut book = (first.best_bid, first.best_ask, prev_mid);
    let mut last_seq = first.seq;
    let mut k = 0usize;
    let mut out = Vec::with_capacity(n_intervals as usize);

    for t_index in 0..n_intervals {
        let end = origin + (t_index + 1) as f64 * interval_s;
        let mut active = [false; 2];
        let mut filled = [false; 2];
        let start_k = k;
        while k < events.len() && events[k].time_s < end {
            let e = &events[k];
            for side in [Side::Buy, Side::Sell] {
                let i = side.index();
                if k > 0 && cursors[i].active_at(2 * e.seq) {
                    active[i] = true;
                }
                while fill_ptr[i] < fills[i].len() && fills[i][fill_ptr[i]] <= k {
                    if fills[i][fill_ptr[i]] == k {
                        filled[i] = true;
                    }
                    fill_ptr[i] += 1;
                }
            }
            book = (e.best_bid, e.best_ask, lattice_mid(e)?);
            last_seq = e.seq;
            k += 1;
        }
        if k == start_k {
            for side in [Side::Buy, Side::Sell] {
                active[side.index()] = cursors[side.index()].active_at(2 * last_seq + 1);
            }
        }
        let mid_change = book.2 .0 - prev_mid.0;
        prev_mid = book.2;
        out.push(ResampledInterval {
            t_index,
            last_bid: book.0,
            last_ask: book.1,
            last_mid: book.2,
            mid_change,
            direction: MoveDirection::from_change(mid_change),
            active_buy: active[0],
            active_sell: active[1],
            filled_buy: filled[0],
            filled_sell: filled[1],
        });
    }
    Ok(out)
}

/// One interval per event: the raw-event clock.
pub fn event_intervals(
    events: &[MarketEvent],
    lifecycle: Option<&[LifecycleEvent]>,
) -> Result<Vec<ResampledInterval>> {
    let Some(first) = events.first() else {
        return Err(Error::EmptyStream);
    };
    let spans = lifecycle.map(order_spans).unwrap_or_default();
    let fills = lifecycle
        .map(|l| fill_indices(events, l))
        .unwrap_or_default();
    let mut cursors = [
        ActivityCursor::new(&spans[0]),
        ActivityCursor::new(&spans[1]),
    ];
    let mut fill_ptr = [0usize; 2];
    let mut prev_mid = Price(lattice_mid(first)?.0 - 2 * first.direction.ticks());
    let mut out = Vec::with_capacity(events.len());
    for (k, e) in events.iter().enumerate() {
        if k > 0 && e.seq <= events[k - 1].seq {
            return Err(Error::MalformedStream {
                seq: e.seq,
                reason: "events out of order",
            });
        }
        let mut active = [false; 2];
        let mut filled = [false; 2];
        for side in [Side::Buy, Side::Sell] {
            let i = side.index();
            active[i] = k > 0 && cursors[i].active_at(2 * e.seq);
            while fill_ptr[i] < fills[i].len() && fills[i][fill_ptr[i]] <= k {
                filled[i] |= fills[i][fill_ptr[i]] == k;
                fill_ptr[i] += 1;
            }
        }
        let mid = lattice_mid(e)?;
        let mid_change = mid.0 - prev_mid.0;
        prev_mid = mid;
        out.push(ResampledInterval {
            t_index: k as u64,
            last_bid: e.best_bid,
            last_ask: e.best_ask,
            last_mid: mid,
            mid_change,
            direction: MoveDirection::from_change(mid_change),
            active_buy: active[0],
            active_sell: active[1],
            filled_buy: filled[0],
            filled_sell: filled[1],
        });
    }
    Ok(out)
}

pub fn count_multi_tick(intervals: &[ResampledInterval]) -> u64 {
    intervals.iter().filter(|i| i.is_multi_tick()).count() as u64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UmdEstimate {
    pub p_up: Proportion,
    pub p_mid: Proportion,
    pub p_down: Proportion,
    pub n_moves: u64,
}

/// Move frequencies between consecutive intervals. The first interval has no
/// predecessor and is skipped. The middle value absorbs rounding so the three
/// values sum to exactly one.
pub fn estimate_umd(intervals: &[ResampledInterval]) -> Result<UmdEstimate> {
    if intervals.len() < 2 {
        return Err(Error::EmptyStream);
    }
    let mut counts = [0u64; 3];
    for i in &intervals[1..] {
        let slot = match i.direction {
            MoveDirection::Up => 0,
            MoveDirection::Middle => 1,
            MoveDirection::Down => 2,
        };
        counts[slot] += 1;
    }
    let n = intervals.len() as u64 - 1;
    let prop = |c| Proportion::new(c, n).ok_or(Error::EmptyStream);
    let p_up = prop(counts[0])?;
    let p_down = prop(counts[2])?;
    let mut p_mid = prop(counts[1])?;
    p_mid.value = 1.0 - p_up.value - p_down.value;
    Ok(UmdEstimate {
        p_up,
        p_mid,
        p_down,
        n_moves: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FillRateEstimate {
    /// Fill frequency over active intervals without an adverse move.
    pub r_f: Result<Proportion>,
    /// Fill frequency over active intervals with an adverse move.
    pub p_fill_down: Result<Proportion>,
}

/// Fill frequencies pooled over both sides. A buy is exposed to an adverse
/// move on a Down interval, a sell on an Up interval.
pub fn estimate_fill_rates(intervals: &[ResampledInterval]) -> FillRateEstimate {
    let (mut adverse_n, mut adverse_f, mut quiet_n, mut quiet_f) = (0u64, 0u64, 0u64, 0u64);
    for i in intervals {
        for side in [Side::Buy, Side::Sell] {
            let adverse = matches!(
                (side, i.direction),
                (Side::Buy, MoveDirection::Down) | (Side::Sell, MoveDirection::Up)
            );
            // One fill per event, so the loser of a double fill never shows up.
            let other_wins = match side {
                Side::Buy => i.direction == MoveDirection::Up,
                Side::Sell => i.direction != MoveDirection::Up,
            };
            let censored = !i.filled(side) && i.filled(side.opposite()) && other_wins;
            if !i.active(side) || censored {
                continue;
            }
            let filled = i.filled(side) as u64;
            if adverse {
                adverse_n += 1;
                adverse_f += filled;
            } else {
                quiet_n += 1;
                quiet_f += filled;
            }
        }
    }
    FillRateEstimate {
        r_f: Proportion::new(quiet_f, quiet_n).ok_or(Error::InsufficientData(
            "no active intervals without adverse moves",
        )),
        p_fill_down: Proportion::new(adverse_f, adverse_n).ok_or(Error::InsufficientData(
            "no active intervals with adverse moves",
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub std_err: f64,
    pub n_gaps: u64,
}

/// Inverse mean gap between successive fills, per second.
pub fn estimate_lambda_f(fill_times: &[f64]) -> Result<RateEstimate> {
    if fill_times.len() < 2 {
        return Err(Error::InsufficientData("need at least two fills"));
    }
    let span = fill_times[fill_times.len() - 1] - fill_times[0];
    if !(span > 0.0) {
        return Err(Error::InsufficientData("fills span no time"));
    }
    let n_gaps = fill_times.len() as u64 - 1;
    let rate = n_gaps as f64 / span;
    Ok(RateEstimate {
        rate,
        std_err: rate / libm::sqrt(n_gaps as f64),
        n_gaps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationResult {
    pub n_intervals: u64,
    pub n_multi_tick: u64,
    pub umd: UmdEstimate,
    pub r_f: Option<Proportion>,
    pub p_fill_down: Option<Proportion>,
    pub lambda_f: Option<RateEstimate>,
}

impl CalibrationResult {
    pub fn model(&self) -> Result<ModelParams> {
        let r_f = self
            .r_f
            .ok_or(Error::InsufficientData("r_f not estimated"))?;
        let p_fill_down = self
            .p_fill_down
            .ok_or(Error::InsufficientData("p_fill_down not estimated"))?;
        ModelParams::new(
            self.umd.p_up.value,
            self.umd.p_mid.value,
            self.umd.p_down.value,
            r_f.value,
            p_fill_down.value,
        )
    }
}

/// Full calibration: moves from the resampled book, fill rates from the
/// lifecycle when one is given, the exponential rate from its fill times.
pub fn calibrate(
    events: &[MarketEvent],
    lifecycle: Option<&[LifecycleEvent]>,
    interval_s: f64,
) -> Result<CalibrationResult> {
    let intervals = resample(events, lifecycle, interval_s)?;
    let umd = estimate_umd(&intervals)?;
    let (r_f, p_fill_down, lambda_f) = match lifecycle {
        Some(l) => {
            let rates = estimate_fill_rates(&intervals);
            let times: Vec<f64> = l
                .iter()
                .filter(|e| e.kind == LifecycleKind::Filled)
                .map(|e| e.time_s)
                .collect();
            (
                rates.r_f.ok(),
                rates.p_fill_down.ok(),
                estimate_lambda_f(&times).ok(),
            )
        }
        None => (None, None, None),
    };
    Ok(CalibrationResult {
        n_intervals: intervals.len() as u64,
        n_multi_tick: count_multi_tick(&intervals),
        umd,
        r_f,
        p_fill_down,
        lambda_f,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftComparison {
    pub theoretical_ticks: f64,
    pub empirical: MeanEstimate,
}

impl DriftComparison {
    pub fn z_score(&self) -> f64 {
        self.empirical.z_score(self.theoretical_ticks)
    }
}

/// Closed-form drift on the fill event against the realised mean move on the
/// report's fill events (sell moves negated and pooled with buys).
pub fn compare_drift(
    model: &ModelParams,
    report: &BacktestReport,
    events: &[MarketEvent],
) -> Result<DriftComparison> {
    let theoretical_ticks = drift_given_fill(model)?;
    let analysis = drift_after_fills(&report.fills, events, 1, report.seed)?;
    let empirical = analysis
        .pooled_against_order()
        .ok_or(Error::InsufficientData("no fills"))?;
    Ok(DriftComparison {
        theoretical_ticks,
        empirical,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub lambda_f: f64,
    pub gaps_s: Vec<f64>,
    /// Exponential sample of the same size and rate.
    pub reference_s: Vec<f64>,
    pub bin_upper_s: f64,
    pub observed_hist: Vec<u64>,
    pub reference_hist: Vec<u64>,
    pub two_sample: KsTest,
    pub one_sample: KsTest,
}

pub const MIN_TAIL_FILLS: usize = 30;

/// Fill gaps against an exponential law with rate `lambda_f`. The histograms
/// share bins up to the exponential's 99.9% quantile.
pub fn interarrival_tail_report(
    fill_times: &[f64],
    lambda_f: f64,
    seed: u64,
    bins: usize,
) -> Result<TailReport> {
    if fill_times.len() < MIN_TAIL_FILLS {
        return Err(Error::InsufficientData("need at least 30 fills"));
    }
    if !(lambda_f.is_finite() && lambda_f > 0.0) {
        return Err(Error::InvalidRate(lambda_f));
    }
    let gaps_s: Vec<f64> = fill_times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut rng = seeded(seed, 31);
    let reference_s: Vec<f64> = (0..gaps_s.len())
        .map(|_| exp_draw(&mut rng, lambda_f))
        .collect();
    let bin_upper_s = -libm::log(1e-3) / lambda_f;
    let two_sample =
        ks_two_sample(&gaps_s, &reference_s).ok_or(Error::InsufficientData("empty sample"))?;
    let one_sample = ks_one_sample(&gaps_s, |x| 1.0 - libm::exp(-lambda_f * x.max(0.0)))
        .ok_or(Error::InsufficientData("empty sample"))?;
    Ok(TailReport {
        lambda_f,
        observed_hist: histogram(&gaps_s, 0.0, bin_upper_s, bins),
        reference_hist: histogram(&reference_s, 0.0, bin_upper_s, bins),
        gaps_s,
        reference_s,
        bin_upper_s,
        two_sample,
        one_sample,
    })
}
