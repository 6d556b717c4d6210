//! Discrete tick-grid market making: price vocabulary, synthetic market
//! models, closed-form fill drift, fill techniques, a naive at-the-touch
//! strategy, the backtest event loop and calibration from event streams.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `touchdrift` companion crate.
//!
//! Prices are integers in half-ticks ([`Price`]) so the mid of a one-tick
//! spread is exact. All generators and fill engines are deterministic given
//! their seed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod calibration;
pub mod comparison;
pub mod engine;
mod error;
pub mod fill_model;
pub mod market_model;
pub mod stats;
pub mod strategy;
pub mod theory;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    mid_of, Aggressor, FillRecord, MarketEvent, MoveDirection, OrderId, OrderState, Price, Side,
    TickGrid, TradeMark, VirtualOrder,
};
