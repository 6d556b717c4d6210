use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("price {price} is not on the half-tick lattice of tick size {tick_size}")]
    OffGridPrice { price: f64, tick_size: f64 },
    #[error("spread must be exactly one tick (bid {bid}, ask {ask} in half-ticks)")]
    InvalidSpread { bid: i64, ask: i64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("Hawkes process is not stationary: alpha {alpha} >= beta {beta}")]
    NonStationary { alpha: f64, beta: f64 },
    #[error("Markov chain is reducible (a transition probability is zero)")]
    Reducible,
    #[error("fill rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("fill probability is zero; conditional drift undefined")]
    DegenerateFill,
    #[error("fill would move position from {position} outside [-1, 1]")]
    PositionBound { position: i8 },
    #[error("fill references order {0} which is not working on that side")]
    UnknownOrder(u64),
    #[error("order {0} is not working")]
    InvalidTransition(u64),
    #[error("malformed stream at seq {seq}: {reason}")]
    MalformedStream { seq: u64, reason: &'static str },
    #[error("event stream is empty")]
    EmptyStream,
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
}
