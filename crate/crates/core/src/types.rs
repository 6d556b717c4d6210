//! Tick-grid prices and the event/order vocabulary shared by every module.

use core::fmt;

use crate::{Error, Result};

/// A price in integer half-ticks.
///
/// With a one-tick spread the bid and ask sit on even half-tick values and the
/// mid on the odd value between them, so every mid is exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(pub i64);

impl Price {
    pub const fn half_ticks(self) -> i64 {
        self.0
    }

    /// Signed distance to `other` in whole ticks (may be fractional).
    pub fn ticks_to(self, other: Price) -> f64 {
        (other.0 - self.0) as f64 / 2.0
    }
}

impl core::ops::Add<i64> for Price {
    type Output = Price;

    fn add(self, rhs: i64) -> Price {
        Price(self.0 + rhs)
    }
}

impl core::ops::Sub<i64> for Price {
    type Output = Price;

    fn sub(self, rhs: i64) -> Price {
        Price(self.0 - rhs)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}h", self.0)
    }
}

/// Instrument price grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickGrid {
    tick_size: f64,
}

impl TickGrid {
    /// Ten-year Treasury note futures: 1/64 of a point.
    pub const TEN_YEAR_NOTE: TickGrid = TickGrid {
        tick_size: 1.0 / 64.0,
    };

    pub fn new(tick_size: f64) -> Result<Self> {
        if !(tick_size.is_finite() && tick_size > 0.0) {
            return Err(Error::InvalidParams(
                "tick_size must be positive and finite",
            ));
        }
        Ok(Self { tick_size })
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn half_tick(&self) -> f64 {
        self.tick_size / 2.0
    }

    /// Converts an external decimal price to half-ticks.
    ///
    /// Accepts prices within `1e-9 * tick_size` of a lattice point.
    pub fn to_internal(&self, price: f64) -> Result<Price> {
        let off_grid = Error::OffGridPrice {
            price,
            tick_size: self.tick_size,
        };
        if !price.is_finite() {
            return Err(off_grid);
        }
        let scaled = price / self.half_tick();
        if libm::fabs(scaled) >= 9.0e15 {
            return Err(off_grid);
        }
        let n = libm::round(scaled);
        if libm::fabs(price - n * self.half_tick()) > 1e-9 * self.tick_size {
            return Err(off_grid);
        }
        Ok(Price(n as i64))
    }

    pub fn to_external(&self, price: Price) -> f64 {
        price.0 as f64 * self.half_tick()
    }

    /// Converts an amount in half-ticks (cash, P&L) to price units.
    pub fn half_ticks_to_price(&self, amount: i64) -> f64 {
        amount as f64 * self.half_tick()
    }
}

impl Default for TickGrid {
    fn default() -> Self {
        Self::TEN_YEAR_NOTE
    }
}

/// One of the three discrete mid-price outcomes of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveDirection {
    Up,
    Middle,
    Down,
}

impl MoveDirection {
    /// Signed outcome in ticks.
    pub const fn ticks(self) -> i64 {
        match self {
            MoveDirection::Up => 1,
            MoveDirection::Middle => 0,
            MoveDirection::Down => -1,
        }
    }

    /// Classifies a mid change by sign only.
    pub fn from_change(delta: i64) -> Self {
        match delta.signum() {
            1 => MoveDirection::Up,
            -1 => MoveDirection::Down,
            _ => MoveDirection::Middle,
        }
    }

    pub const fn mirror(self) -> Self {
        match self {
            MoveDirection::Up => MoveDirection::Down,
            MoveDirection::Middle => MoveDirection::Middle,
            MoveDirection::Down => MoveDirection::Up,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub const fn index(self) -> usize {
        match self {
            Side::Buy => 0,
            Side::Sell => 1,
        }
    }

    pub const fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub const fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

/// Which side crossed the spread in a market trade.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggressor {
    Buy,
    Sell,
}

impl Aggressor {
    /// A sell aggressor trades against resting buy orders and vice versa.
    pub const fn opposes(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Aggressor::Sell, Side::Buy) | (Aggressor::Buy, Side::Sell)
        )
    }

    pub const fn index(self) -> usize {
        match self {
            Aggressor::Buy => 0,
            Aggressor::Sell => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TradeMark {
    pub aggressor: Aggressor,
    pub qty: u32,
    pub price: Price,
}

/// One discrete book event: the touch after the event and the move that led
/// to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketEvent {
    pub seq: u64,
    pub time_s: f64,
    pub direction: MoveDirection,
    pub best_bid: Price,
    pub best_ask: Price,
    pub trade: Option<TradeMark>,
}

impl MarketEvent {
    /// Event with a one-tick spread around `mid`.
    pub fn around_mid(seq: u64, time_s: f64, direction: MoveDirection, mid: Price) -> Self {
        Self {
            seq,
            time_s,
            direction,
            best_bid: mid - 1,
            best_ask: mid + 1,
            trade: None,
        }
    }

    pub fn spread(&self) -> i64 {
        self.best_ask.0 - self.best_bid.0
    }

    /// Strict mid: requires the one-tick spread.
    pub fn mid(&self) -> Result<Price> {
        mid_of(self)
    }

    /// Mid for any positive spread whose mid lands on the half-tick lattice.
    pub fn mid_lenient(&self) -> Option<Price> {
        let sum = self.best_bid.0 + self.best_ask.0;
        (self.best_ask > self.best_bid && sum % 2 == 0).then_some(Price(sum / 2))
    }

    pub fn touch(&self, side: Side) -> Price {
        match side {
            Side::Buy => self.best_bid,
            Side::Sell => self.best_ask,
        }
    }
}

/// Mid price of a one-tick-spread event, in half-ticks.
pub fn mid_of(event: &MarketEvent) -> Result<Price> {
    if event.spread() != 2 {
        return Err(Error::InvalidSpread {
            bid: event.best_bid.0,
            ask: event.best_ask.0,
        });
    }
    Ok(Price(event.best_bid.0 + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderState {
    Working,
    Filled,
    Canceled,
}

/// A simulated resting limit order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VirtualOrder {
    pub id: OrderId,
    pub side: Side,
    pub price: Price,
    pub qty: u32,
    pub created_seq: u64,
    pub state: OrderState,
}

impl VirtualOrder {
    /// A one-lot order resting at the touch of `event`.
    pub fn at_touch(id: OrderId, side: Side, event: &MarketEvent) -> Self {
        Self {
            id,
            side,
            price: event.touch(side),
            qty: 1,
            created_seq: event.seq,
            state: OrderState::Working,
        }
    }

    pub fn is_working(&self) -> bool {
        self.state == OrderState::Working
    }

    pub fn fill(&mut self) -> Result<()> {
        self.transition(OrderState::Filled)
    }

    pub fn cancel(&mut self) -> Result<()> {
        self.transition(OrderState::Canceled)
    }

    fn transition(&mut self, to: OrderState) -> Result<()> {
        if !self.is_working() {
            return Err(Error::InvalidTransition(self.id.0));
        }
        self.state = to;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FillRecord {
    pub order_id: OrderId,
    pub side: Side,
    pub fill_seq: u64,
    pub time_s: f64,
    pub fill_price: Price,
    /// Mid after the event that filled the order.
    pub mid_at_fill: Price,
    /// Filled by the price moving through the order.
    pub adverse: bool,
}
