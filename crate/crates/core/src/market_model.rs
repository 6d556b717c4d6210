//! Synthetic market-event streams.
//!
//! * [`simulate_umd`]: i.i.d. up/middle/down one-tick moves on a uniform clock.
//! * [`simulate_gchp`]: up/down moves driven by a two-state Markov chain with
//!   Hawkes-distributed arrival times.
//! * [`attach_trades`]: market-order marks for the trade-matching techniques.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{Aggressor, MarketEvent, MoveDirection, Price, TradeMark};
use crate::{Error, Result};

/// Default opening mid, in half-ticks (110.5390625 on the 1/64 grid).
pub const DEFAULT_START_MID: Price = Price(14149);

/// Published probability tables are rounded; their sum may miss one by this.
pub const PROB_SUM_TOLERANCE: f64 = 1.5e-2;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exponential draw with the given rate.
pub(crate) fn exp_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(1.0 - rng.random::<f64>()) / rate
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

/// Parameters of the up/middle/down model and its fill process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub p_up: f64,
    pub p_mid: f64,
    pub p_down: f64,
    /// Per-event fill probability when the price does not move through the order.
    pub r_f: f64,
    /// Fill probability when the price moves through the order.
    pub p_fill_down: f64,
}

impl ModelParams {
    pub fn new(p_up: f64, p_mid: f64, p_down: f64, r_f: f64, p_fill_down: f64) -> Result<Self> {
        let params = Self {
            p_up,
            p_mid,
            p_down,
            r_f,
            p_fill_down,
        };
        params.validate()?;
        Ok(params)
    }

    /// Ten-year note futures calibrated at one-second resolution, with the
    /// idealised certain fill on adverse moves.
    pub fn ten_year_note_1s() -> Self {
        Self {
            p_up: 0.0173,
            p_mid: 0.965,
            p_down: 0.0173,
            r_f: 0.018,
            p_fill_down: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.p_up, self.p_mid, self.p_down]
            .iter()
            .all(|&p| is_probability(p))
        {
            return Err(Error::InvalidParams(
                "move probabilities must lie in [0, 1]",
            ));
        }
        if libm::fabs(self.p_up + self.p_mid + self.p_down - 1.0) > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidParams("move probabilities must sum to 1"));
        }
        if !(0.0..1.0).contains(&self.r_f) {
            return Err(Error::InvalidParams("r_f must lie in [0, 1)"));
        }
        if !(self.p_fill_down > 0.0 && self.p_fill_down <= 1.0) {
            return Err(Error::InvalidParams("p_fill_down must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Sell-side view: up and down swap roles.
    pub fn mirror(&self) -> Self {
        Self {
            p_up: self.p_down,
            p_down: self.p_up,
            ..*self
        }
    }
}

/// Exponential-kernel Hawkes intensity `mu + sum(alpha * exp(-beta * (t - t_i)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HawkesParams {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl HawkesParams {
    pub fn new(mu: f64, alpha: f64, beta: f64) -> Result<Self> {
        let h = Self { mu, alpha, beta };
        h.validate()?;
        Ok(h)
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(rate, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParams("hawkes mu must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParams("hawkes alpha must be non-negative"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParams("hawkes beta must be positive"));
        }
        if self.alpha >= self.beta {
            return Err(Error::NonStationary {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok(())
    }

    /// Long-run event rate `mu / (1 - alpha / beta)`.
    pub fn stationary_rate(&self) -> f64 {
        self.mu / (1.0 - self.alpha / self.beta)
    }
}

/// Unbounded Ogata-thinning sampler; yields strictly increasing event times.
#[derive(Clone, Debug)]
pub struct HawkesSampler {
    params: HawkesParams,
    rng: ChaCha8Rng,
    t: f64,
    // Excitation part of the intensity at time `t`.
    excitation: f64,
}

impl HawkesSampler {
    pub fn new(params: HawkesParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self::from_rng(params, seeded(seed, 0)))
    }

    pub(crate) fn from_rng(params: HawkesParams, rng: ChaCha8Rng) -> Self {
        Self {
            params,
            rng,
            t: 0.0,
            excitation: 0.0,
        }
    }

    pub fn next_time(&mut self) -> f64 {
        let HawkesParams { mu, alpha, beta } = self.params;
        loop {
            // Intensity only decays between events, so its current value bounds it.
            let bound = mu + self.excitation;
            let wait = exp_draw(&mut self.rng, bound);
            self.excitation *= libm::exp(-beta * wait);
            self.t += wait;
            if self.rng.random::<f64>() * bound <= mu + self.excitation {
                self.excitation += alpha;
                return self.t;
            }
        }
    }
}

impl Iterator for HawkesSampler {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_time())
    }
}

/// Event times of a Hawkes process on `[0, horizon_s)`.
pub fn simulate_hawkes(h: HawkesParams, horizon_s: f64, seed: u64) -> Result<Vec<f64>> {
    h.validate()?;
    if !(horizon_s > 0.0) {
        return Err(Error::InvalidParams("horizon must be positive"));
    }
    Ok(HawkesSampler::new(h, seed)?
        .take_while(|&t| t < horizon_s)
        .collect())
}

/// Compensator increments between successive events (the first measured from
/// zero). For a correctly specified process they are i.i.d. Exp(1).
pub fn hawkes_residuals(h: &HawkesParams, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    let mut excitation = 0.0;
    for &t in times {
        let dt = t - prev;
        let decay = libm::exp(-h.beta * dt);
        out.push(h.mu * dt + excitation / h.beta * (1.0 - decay));
        excitation = excitation * decay + h.alpha;
        prev = t;
    }
    out
}

/// Markov chain over the direction of the previous move, with Hawkes arrivals.
///
/// `p_du` is the probability of a down move after an up move, `p_ud` of an up
/// move after a down move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GchpParams {
    pub p_uu: f64,
    pub p_du: f64,
    pub p_ud: f64,
    pub p_dd: f64,
    pub hawkes: HawkesParams,
}

impl GchpParams {
    pub fn new(p_uu: f64, p_du: f64, p_ud: f64, p_dd: f64, hawkes: HawkesParams) -> Result<Self> {
        let g = Self {
            p_uu,
            p_du,
            p_ud,
            p_dd,
            hawkes,
        };
        g.validate()?;
        Ok(g)
    }

    /// Chain with `p_ud = p_du = 1 - p_stay`.
    pub fn symmetric(p_stay: f64, hawkes: HawkesParams) -> Result<Self> {
        Self::new(p_stay, 1.0 - p_stay, 1.0 - p_stay, p_stay, hawkes)
    }

    /// Rows must be probability vectors. Zero entries are allowed here; the
    /// steady-state formulas reject them separately.
    pub fn validate(&self) -> Result<()> {
        if ![self.p_uu, self.p_du, self.p_ud, self.p_dd]
            .iter()
            .all(|&p| is_probability(p))
        {
            return Err(Error::InvalidParams(
                "transition probabilities must lie in [0, 1]",
            ));
        }
        if libm::fabs(self.p_uu + self.p_du - 1.0) > 1e-9
            || libm::fabs(self.p_ud + self.p_dd - 1.0) > 1e-9
        {
            return Err(Error::InvalidParams("transition rows must sum to 1"));
        }
        self.hawkes.validate()
    }

    pub fn is_irreducible(&self) -> bool {
        [self.p_uu, self.p_du, self.p_ud, self.p_dd]
            .iter()
            .all(|&p| p > 0.0)
    }

    /// Probability that the next move is up given the previous direction.
    fn p_up_after(&self, previous: MoveDirection) -> f64 {
        match previous {
            MoveDirection::Down => self.p_ud,
            _ => self.p_uu,
        }
    }
}

/// Steady-state probabilities `(q_up, q_down)` of the direction chain.
pub fn gchp_steady_state(g: &GchpParams) -> Result<(f64, f64)> {
    g.validate()?;
    if !g.is_irreducible() {
        return Err(Error::Reducible);
    }
    let q_up = g.p_ud / (g.p_ud + g.p_du);
    Ok((q_up, 1.0 - q_up))
}

/// Infinite up/middle/down stream on a uniform clock.
#[derive(Clone, Debug)]
pub struct UmdStream {
    params: ModelParams,
    rng: ChaCha8Rng,
    dt_s: f64,
    seq: u64,
    mid: Price,
}

impl UmdStream {
    pub fn new(params: ModelParams, dt_s: f64, start_mid: Price, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(Error::InvalidParams("dt_s must be positive"));
        }
        if start_mid.0.rem_euclid(2) != 1 {
            return Err(Error::InvalidParams("start mid must be odd in half-ticks"));
        }
        Ok(Self {
            params,
            rng: seeded(seed, 0),
            dt_s,
            seq: 0,
            mid: start_mid,
        })
    }
}

impl Iterator for UmdStream {
    type Item = MarketEvent;

    fn next(&mut self) -> Option<MarketEvent> {
        // Middle absorbs any rounding slack in the published probabilities.
        let u = self.rng.random::<f64>();
        let direction = if u < self.params.p_up {
            MoveDirection::Up
        } else if u < self.params.p_up + self.params.p_down {
            MoveDirection::Down
        } else {
            MoveDirection::Middle
        };
        self.mid = self.mid + 2 * direction.ticks();
        let event =
            MarketEvent::around_mid(self.seq, self.seq as f64 * self.dt_s, direction, self.mid);
        self.seq += 1;
        Some(event)
    }
}

/// `n_steps` events of the up/middle/down model at times `k * dt_s`.
pub fn simulate_umd(
    params: ModelParams,
    n_steps: usize,
    dt_s: f64,
    start_mid: Price,
    seed: u64,
) -> Result<Vec<MarketEvent>> {
    if n_steps == 0 {
        return Err(Error::InvalidParams("n_steps must be at least 1"));
    }
    Ok(UmdStream::new(params, dt_s, start_mid, seed)?
        .take(n_steps)
        .collect())
}

/// Infinite GCHP stream: every event is a one-tick move.
#[derive(Clone, Debug)]
pub struct GchpStream {
    params: GchpParams,
    clock: HawkesSampler,
    rng: ChaCha8Rng,
    previous: MoveDirection,
    seq: u64,
    mid: Price,
}

impl GchpStream {
    pub fn new(
        g: GchpParams,
        start_state: MoveDirection,
        start_mid: Price,
        seed: u64,
    ) -> Result<Self> {
        g.validate()?;
        if start_state == MoveDirection::Middle {
            return Err(Error::InvalidParams("start state must be Up or Down"));
        }
        if start_mid.0.rem_euclid(2) != 1 {
            return Err(Error::InvalidParams("start mid must be odd in half-ticks"));
        }
        Ok(Self {
            params: g,
            clock: HawkesSampler::from_rng(g.hawkes, seeded(seed, 0)),
            rng: seeded(seed, 1),
            previous: start_state,
            seq: 0,
            mid: start_mid,
        })
    }
}

impl Iterator for GchpStream {
    type Item = MarketEvent;

    fn next(&mut self) -> Option<MarketEvent> {
        let t = self.clock.next_time();
        let direction = if self.rng.random::<f64>() < self.params.p_up_after(self.previous) {
            MoveDirection::Up
        } else {
            MoveDirection::Down
        };
        self.previous = direction;
        self.mid = self.mid + 2 * direction.ticks();
        let event = MarketEvent::around_mid(self.seq, t, direction, self.mid);
        self.seq += 1;
        Some(event)
    }
}

/// GCHP events on `[0, horizon_s)`.
pub fn simulate_gchp(
    g: GchpParams,
    horizon_s: f64,
    start_state: MoveDirection,
    start_mid: Price,
    seed: u64,
) -> Result<Vec<MarketEvent>> {
    if !(horizon_s > 0.0) {
        return Err(Error::InvalidParams("horizon must be positive"));
    }
    Ok(GchpStream::new(g, start_state, start_mid, seed)?
        .take_while(|e| e.time_s < horizon_s)
        .collect())
}

/// Market-order flow attached to a price stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeFlowParams {
    /// Probability that an event without a price move carries a trade.
    pub p_trade_on_mid: f64,
}

impl TradeFlowParams {
    pub const DEFAULT_P_TRADE_ON_MID: f64 = 0.05;
}

impl Default for TradeFlowParams {
    fn default() -> Self {
        Self {
            p_trade_on_mid: Self::DEFAULT_P_TRADE_ON_MID,
        }
    }
}

/// Marks trades on a stream in place.
///
/// An up move is a buy market order lifting the old ask (now the bid); a down
/// move is a sell order hitting the old bid (now the ask). Quiet events get a
/// one-lot trade with probability `p_trade_on_mid`, side by fair coin, at the
/// touch it takes.
pub fn attach_trades(events: &mut [MarketEvent], flow: &TradeFlowParams, seed: u64) {
    let mut rng = seeded(seed, 7);
    let p = flow.p_trade_on_mid.clamp(0.0, 1.0);
    for event in events.iter_mut() {
        event.trade = match event.direction {
            MoveDirection::Up => Some(TradeMark {
                aggressor: Aggressor::Buy,
                qty: 1,
                price: event.best_bid,
            }),
            MoveDirection::Down => Some(TradeMark {
                aggressor: Aggressor::Sell,
                qty: 1,
                price: event.best_ask,
            }),
            MoveDirection::Middle => {
                let trade = rng.random::<f64>() < p;
                let buyer = rng.random::<bool>();
                let (aggressor, price) = if buyer {
                    (Aggressor::Buy, event.best_ask)
                } else {
                    (Aggressor::Sell, event.best_bid)
                };
                trade.then_some(TradeMark {
                    aggressor,
                    qty: 1,
                    price,
                })
            }
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, MeanAccumulator};
    use proptest::prelude::*;

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    fn count(events: &[MarketEvent], d: MoveDirection) -> usize {
        events.iter().filter(|e| e.direction == d).count()
    }

    #[test]
    fn all_middle_is_flat() {
        let p = ModelParams::new(0.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let events = simulate_umd(p, 500, 1.0, DEFAULT_START_MID, 1).unwrap();
        assert!(events.iter().all(|e| e.direction == MoveDirection::Middle));
        assert!(events.iter().all(|e| e.mid().unwrap() == DEFAULT_START_MID));
    }

    #[test]
    fn umd_rejects_bad_inputs() {
        let p = ModelParams::ten_year_note_1s();
        assert!(simulate_umd(p, 0, 1.0, DEFAULT_START_MID, 1).is_err());
        assert!(simulate_umd(p, 10, 1.0, Price(14148), 1).is_err());
        assert!(simulate_umd(p, 10, 0.0, DEFAULT_START_MID, 1).is_err());
        assert!(ModelParams::new(0.5, 0.5, 0.5, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.3, 0.4, 0.3, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.3, 0.4, 0.3, 0.1, 0.0).is_err());
    }

    #[test]
    fn umd_timestamps_and_seq() {
        let events = simulate_umd(
            ModelParams::ten_year_note_1s(),
            5,
            0.5,
            DEFAULT_START_MID,
            3,
        )
        .unwrap();
        for (k, e) in events.iter().enumerate() {
            assert_eq!(e.seq, k as u64);
            assert_eq!(e.time_s, k as f64 * 0.5);
        }
    }

    #[test]
    fn umd_figure_two_probabilities() {
        let p = ModelParams::new(0.017, 0.976, 0.017, 0.0, 1.0).unwrap();
        let n = 1000;
        let events = simulate_umd(p, n, 1.0, DEFAULT_START_MID, 2024).unwrap();
        for (d, prob) in [
            (MoveDirection::Up, 0.017),
            (MoveDirection::Middle, 0.976),
            (MoveDirection::Down, 0.017),
        ] {
            let freq = count(&events, d) as f64 / n as f64;
            assert!((freq - prob).abs() <= three_sigma(prob, n), "{d:?} {freq}");
        }
    }

    #[test]
    fn umd_law_of_large_numbers() {
        let p = ModelParams::new(0.3, 0.4, 0.3, 0.0, 1.0).unwrap();
        let n = 1_000_000;
        let events = simulate_umd(p, n, 1.0, DEFAULT_START_MID, 99).unwrap();
        for (d, prob) in [
            (MoveDirection::Up, 0.3),
            (MoveDirection::Middle, 0.4),
            (MoveDirection::Down, 0.3),
        ] {
            let freq = count(&events, d) as f64 / n as f64;
            assert!((freq - prob).abs() <= 0.002);
            assert!((freq - prob).abs() <= three_sigma(prob, n));
        }
    }

    #[test]
    fn hawkes_without_excitation_is_poisson() {
        let h = HawkesParams::poisson(0.5).unwrap();
        let horizon = 20_000.0;
        let n = simulate_hawkes(h, horizon, 5).unwrap().len() as f64;
        let expected = 0.5 * horizon;
        assert!((n - expected).abs() <= 3.0 * expected.sqrt());
    }

    #[test]
    fn hawkes_stationary_rate_over_seeds() {
        // mu / (1 - alpha / beta) = 0.2 events per second.
        let h = HawkesParams::new(0.1, 0.5, 1.0).unwrap();
        let horizon = 1e5;
        let mut rates = MeanAccumulator::default();
        for seed in 0..30 {
            rates.push(simulate_hawkes(h, horizon, seed).unwrap().len() as f64 / horizon);
        }
        let est = rates.estimate().unwrap();
        assert!(est.z_score(h.stationary_rate()).abs() <= 3.0, "{est:?}");
    }

    #[test]
    fn hawkes_short_horizon_can_be_empty() {
        let h = HawkesParams::poisson(1e-6).unwrap();
        assert!(simulate_hawkes(h, 1e-3, 0).unwrap().is_empty());
    }

    #[test]
    fn hawkes_rejects_explosive() {
        assert_eq!(
            HawkesParams::new(0.1, 1.0, 1.0),
            Err(Error::NonStationary {
                alpha: 1.0,
                beta: 1.0
            })
        );
        let bad = HawkesParams {
            mu: 0.1,
            alpha: 2.0,
            beta: 1.0,
        };
        assert!(matches!(
            simulate_hawkes(bad, 10.0, 0),
            Err(Error::NonStationary { .. })
        ));
    }

    #[test]
    fn hawkes_time_rescaling_passes_ks() {
        // Compensator increments must look Exp(1); average KS statistic over
        // seeds stays below the 1% critical value for n = 1e4.
        let h = HawkesParams::new(0.5, 0.6, 1.2).unwrap();
        let critical = 1.628 / 100.0;
        let mut stat = MeanAccumulator::default();
        for seed in 0..10 {
            let times: Vec<f64> = HawkesSampler::new(h, seed).unwrap().take(10_000).collect();
            assert!(times.windows(2).all(|w| w[0] < w[1]));
            let res = hawkes_residuals(&h, &times);
            let ks = ks_one_sample(&res, |x| 1.0 - (-x).exp()).unwrap();
            stat.push(ks.statistic);
        }
        assert!(stat.estimate().unwrap().mean < critical);
    }

    #[test]
    fn gchp_absorbing_up() {
        let g = GchpParams::new(1.0, 0.0, 1.0, 0.0, HawkesParams::poisson(1.0).unwrap()).unwrap();
        let events = simulate_gchp(g, 200.0, MoveDirection::Down, DEFAULT_START_MID, 4).unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.direction == MoveDirection::Up));
        assert_eq!(
            events.last().unwrap().mid().unwrap(),
            DEFAULT_START_MID + 2 * events.len() as i64
        );
    }

    fn up_fraction(g: GchpParams, n: usize, seed: u64) -> f64 {
        let stream = GchpStream::new(g, MoveDirection::Up, DEFAULT_START_MID, seed).unwrap();
        stream
            .take(n)
            .filter(|e| e.direction == MoveDirection::Up)
            .count() as f64
            / n as f64
    }

    /// Standard error of a long-run Markov frequency: the binomial variance
    /// inflated by (1 + r) / (1 - r), r = p_uu - p_ud being the chain's
    /// second eigenvalue.
    fn markov_three_sigma(g: &GchpParams, q: f64, n: usize) -> f64 {
        let r = g.p_uu - g.p_ud;
        3.0 * (q * (1.0 - q) / n as f64 * (1.0 + r) / (1.0 - r)).sqrt()
    }

    #[test]
    fn gchp_symmetric_up_fraction() {
        let g = GchpParams::new(0.4, 0.6, 0.6, 0.4, HawkesParams::poisson(1.0).unwrap()).unwrap();
        let n = 200_000;
        let f = up_fraction(g, n, 11);
        assert!((f - 0.5).abs() <= markov_three_sigma(&g, 0.5, n));
    }

    #[test]
    fn gchp_asymmetric_up_fraction() {
        let g = GchpParams::new(0.6, 0.4, 0.8, 0.2, HawkesParams::poisson(1.0).unwrap()).unwrap();
        let (q_up, _) = gchp_steady_state(&g).unwrap();
        let n = 200_000;
        let f = up_fraction(g, n, 12);
        assert!((f - 2.0 / 3.0).abs() <= markov_three_sigma(&g, q_up, n));
    }

    /// Power iteration on the 2x2 transition matrix, independent of the
    /// closed form.
    fn power_iteration(g: &GchpParams) -> (f64, f64) {
        let (mut u, mut d) = (1.0, 0.0);
        for _ in 0..10_000 {
            let nu = u * g.p_uu + d * g.p_ud;
            let nd = u * g.p_du + d * g.p_dd;
            u = nu;
            d = nd;
        }
        (u, d)
    }

    #[test]
    fn steady_state_matches_power_iteration() {
        let hk = HawkesParams::poisson(1.0).unwrap();
        for (p_uu, p_ud) in [(0.5, 0.5), (0.6, 0.8), (0.01, 0.99), (0.2, 0.3)] {
            let g = GchpParams::new(p_uu, 1.0 - p_uu, p_ud, 1.0 - p_ud, hk).unwrap();
            let (qu, qd) = gchp_steady_state(&g).unwrap();
            let (pu, pd) = power_iteration(&g);
            assert!((qu - pu).abs() < 1e-12 && (qd - pd).abs() < 1e-12);
        }
        let g = GchpParams::new(0.6, 0.4, 0.8, 0.2, hk).unwrap();
        let (qu, qd) = gchp_steady_state(&g).unwrap();
        assert!((qu - 2.0 / 3.0).abs() < 1e-15 && (qd - 1.0 / 3.0).abs() < 1e-15);
        let g = GchpParams::new(0.01, 0.99, 0.99, 0.01, hk).unwrap();
        assert_eq!(gchp_steady_state(&g).unwrap(), (0.5, 0.5));
        let g = GchpParams::new(0.99, 0.01, 0.99, 0.01, hk).unwrap();
        let (qu, _) = gchp_steady_state(&g).unwrap();
        assert!((qu - 0.99).abs() < 1e-12);
    }

    #[test]
    fn steady_state_rejects_reducible() {
        let g = GchpParams::new(1.0, 0.0, 0.5, 0.5, HawkesParams::poisson(1.0).unwrap()).unwrap();
        assert_eq!(gchp_steady_state(&g), Err(Error::Reducible));
    }

    #[test]
    fn trades_follow_moves() {
        let p = ModelParams::new(0.2, 0.6, 0.2, 0.0, 1.0).unwrap();
        let mut events = simulate_umd(p, 5000, 1.0, DEFAULT_START_MID, 8).unwrap();
        attach_trades(
            &mut events,
            &TradeFlowParams {
                p_trade_on_mid: 0.0,
            },
            1,
        );
        for e in &events {
            match e.direction {
                MoveDirection::Up => {
                    let t = e.trade.unwrap();
                    assert_eq!(t.aggressor, Aggressor::Buy);
                    assert_eq!(t.price, e.best_bid);
                }
                MoveDirection::Down => {
                    let t = e.trade.unwrap();
                    assert_eq!(t.aggressor, Aggressor::Sell);
                    assert_eq!(t.price, e.best_ask);
                }
                MoveDirection::Middle => assert!(e.trade.is_none()),
            }
        }
        attach_trades(
            &mut events,
            &TradeFlowParams {
                p_trade_on_mid: 1.0,
            },
            1,
        );
        assert!(events.iter().all(|e| e.trade.is_some()));
    }

    #[test]
    fn trade_frequency_on_quiet_events() {
        let p = ModelParams::new(0.01, 0.98, 0.01, 0.0, 1.0).unwrap();
        let mut events = simulate_umd(p, 1_000_000, 0.05, DEFAULT_START_MID, 21).unwrap();
        attach_trades(
            &mut events,
            &TradeFlowParams {
                p_trade_on_mid: 0.05,
            },
            22,
        );
        let quiet: Vec<_> = events
            .iter()
            .filter(|e| e.direction == MoveDirection::Middle)
            .collect();
        let traded = quiet.iter().filter(|e| e.trade.is_some()).count();
        let freq = traded as f64 / quiet.len() as f64;
        assert!((freq - 0.05).abs() <= three_sigma(0.05, quiet.len()));
        let buys = quiet
            .iter()
            .filter(|e| matches!(e.trade, Some(t) if t.aggressor == Aggressor::Buy))
            .count();
        assert!((buys as f64 / traded as f64 - 0.5).abs() <= three_sigma(0.5, traded));
    }

    fn check_stream(events: &[MarketEvent], start: Price) {
        let mut prev = start;
        for e in events {
            let mid = e.mid().unwrap();
            assert_eq!(mid.0 - prev.0, 2 * e.direction.ticks());
            prev = mid;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn umd_streams_keep_spread(
            p_up in 0.0f64..0.5, p_down in 0.0f64..0.5, seed in any::<u64>(),
        ) {
            let p = ModelParams::new(p_up, 1.0 - p_up - p_down, p_down, 0.0, 1.0).unwrap();
            let events = simulate_umd(p, 300, 1.0, DEFAULT_START_MID, seed).unwrap();
            check_stream(&events, DEFAULT_START_MID);
            let again = simulate_umd(p, 300, 1.0, DEFAULT_START_MID, seed).unwrap();
            prop_assert_eq!(events, again);
        }

        #[test]
        fn gchp_streams_keep_spread(
            p_uu in 0.0f64..=1.0, p_ud in 0.0f64..=1.0, seed in any::<u64>(),
        ) {
            let h = HawkesParams::new(1.0, 0.5, 2.0).unwrap();
            let g = GchpParams::new(p_uu, 1.0 - p_uu, p_ud, 1.0 - p_ud, h).unwrap();
            let events = simulate_gchp(g, 100.0, MoveDirection::Up, DEFAULT_START_MID, seed).unwrap();
            check_stream(&events, DEFAULT_START_MID);
            prop_assert!(events.iter().all(|e| e.direction != MoveDirection::Middle));
            prop_assert!(events.windows(2).all(|w| w[0].time_s < w[1].time_s));
            let again = simulate_gchp(g, 100.0, MoveDirection::Up, DEFAULT_START_MID, seed).unwrap();
            prop_assert_eq!(events, again);
        }
    }
}
