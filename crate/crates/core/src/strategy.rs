//! Naive at-the-touch market maker: one lot per side, position in {-1, 0, +1}.
//!
//! Flat: quote both sides. Long one lot: quote only the sell side. Short one
//! lot: quote only the buy side. A working order left behind by a price move
//! is canceled and replaced at the new touch.

use crate::types::{FillRecord, MarketEvent, OrderId, Price, Side};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RestingQuote {
    pub id: OrderId,
    pub price: Price,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MakerState {
    pub position: i8,
    pub working_buy: Option<RestingQuote>,
    pub working_sell: Option<RestingQuote>,
}

impl MakerState {
    pub fn working(&self, side: Side) -> Option<RestingQuote> {
        match side {
            Side::Buy => self.working_buy,
            Side::Sell => self.working_sell,
        }
    }

    pub fn set_working(&mut self, side: Side, quote: Option<RestingQuote>) {
        match side {
            Side::Buy => self.working_buy = quote,
            Side::Sell => self.working_sell = quote,
        }
    }

    /// Whether the position rule allows quoting `side`.
    pub fn wants(&self, side: Side) -> bool {
        match side {
            Side::Buy => self.position <= 0,
            Side::Sell => self.position >= 0,
        }
    }

    pub fn check_invariants(&self) -> bool {
        (-1..=1).contains(&self.position)
            && !(self.position == 1 && self.working_buy.is_some())
            && !(self.position == -1 && self.working_sell.is_some())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideAction {
    /// Nothing working and nothing wanted.
    Idle,
    Keep,
    Post(Price),
    Cancel,
    /// Cancel the working order and post at the new price.
    Replace(Price),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuoteInstruction {
    pub buy: SideAction,
    pub sell: SideAction,
}

impl QuoteInstruction {
    pub fn side(&self, side: Side) -> SideAction {
        match side {
            Side::Buy => self.buy,
            Side::Sell => self.sell,
        }
    }
}

fn side_action(state: &MakerState, event: &MarketEvent, side: Side) -> SideAction {
    let touch = event.touch(side);
    match (state.wants(side), state.working(side)) {
        (true, None) => SideAction::Post(touch),
        (true, Some(q)) if q.price == touch => SideAction::Keep,
        (true, Some(_)) => SideAction::Replace(touch),
        (false, Some(_)) => SideAction::Cancel,
        (false, None) => SideAction::Idle,
    }
}

/// Quotes wanted after `event`, given the current state.
pub fn desired_quotes(state: &MakerState, event: &MarketEvent) -> QuoteInstruction {
    QuoteInstruction {
        buy: side_action(state, event, Side::Buy),
        sell: side_action(state, event, Side::Sell),
    }
}

/// Position update for a fill of a working order.
pub fn apply_fill(state: &MakerState, fill: &FillRecord) -> Result<MakerState> {
    let position = state.position + fill.side.sign() as i8;
    if !(-1..=1).contains(&position) {
        return Err(Error::PositionBound {
            position: state.position,
        });
    }
    match state.working(fill.side) {
        Some(q) if q.id == fill.order_id => {}
        _ => return Err(Error::UnknownOrder(fill.order_id.0)),
    }
    let mut next = *state;
    next.position = position;
    next.set_working(fill.side, None);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MoveDirection;

    fn ev(mid: i64) -> MarketEvent {
        MarketEvent::around_mid(0, 0.0, MoveDirection::Middle, Price(mid))
    }

    fn fill(side: Side, id: u64) -> FillRecord {
        FillRecord {
            order_id: OrderId(id),
            side,
            fill_seq: 1,
            time_s: 1.0,
            fill_price: Price(100),
            mid_at_fill: Price(101),
            adverse: false,
        }
    }

    fn quote(id: u64, price: i64) -> Option<RestingQuote> {
        Some(RestingQuote {
            id: OrderId(id),
            price: Price(price),
        })
    }

    #[test]
    fn flat_quotes_both_sides() {
        let q = desired_quotes(&MakerState::default(), &ev(101));
        assert_eq!(q.buy, SideAction::Post(Price(100)));
        assert_eq!(q.sell, SideAction::Post(Price(102)));
    }

    #[test]
    fn long_quotes_only_sell() {
        let state = MakerState {
            position: 1,
            ..Default::default()
        };
        let q = desired_quotes(&state, &ev(101));
        assert_eq!(q.buy, SideAction::Idle);
        assert_eq!(q.sell, SideAction::Post(Price(102)));
        let short = MakerState {
            position: -1,
            working_sell: quote(3, 102),
            ..Default::default()
        };
        let q = desired_quotes(&short, &ev(101));
        assert_eq!(q.buy, SideAction::Post(Price(100)));
        assert_eq!(q.sell, SideAction::Cancel);
    }

    #[test]
    fn stale_quote_is_replaced() {
        let state = MakerState {
            position: 0,
            working_buy: quote(1, 100),
            working_sell: quote(2, 102),
        };
        let q = desired_quotes(&state, &ev(103));
        assert_eq!(q.buy, SideAction::Replace(Price(102)));
        assert_eq!(q.sell, SideAction::Replace(Price(104)));
        let q = desired_quotes(&state, &ev(101));
        assert_eq!(q.buy, SideAction::Keep);
        assert_eq!(q.sell, SideAction::Keep);
    }

    #[test]
    fn fills_move_position() {
        let flat = MakerState {
            position: 0,
            working_buy: quote(1, 100),
            working_sell: quote(2, 102),
        };
        let long = apply_fill(&flat, &fill(Side::Buy, 1)).unwrap();
        assert_eq!(long.position, 1);
        assert_eq!(long.working_buy, None);
        assert!(long.check_invariants());
        let back = apply_fill(&long, &fill(Side::Sell, 2)).unwrap();
        assert_eq!(back.position, 0);
    }

    #[test]
    fn fill_beyond_band_is_rejected() {
        let long = MakerState {
            position: 1,
            working_sell: quote(2, 102),
            ..Default::default()
        };
        assert_eq!(
            apply_fill(&long, &fill(Side::Buy, 9)),
            Err(Error::PositionBound { position: 1 })
        );
        assert_eq!(
            apply_fill(&long, &fill(Side::Sell, 9)),
            Err(Error::UnknownOrder(9))
        );
    }
}
