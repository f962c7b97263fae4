use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A query needs work beyond the configured budget (sieve coverage or
    /// an oracle's deliberately small range).
    #[error("budget exceeded: needs {needed}, limit is {budget}")]
    Budget { needed: u64, budget: u64 },

    /// Caller passed arguments that violate the operation contract
    /// (empty ranges, m below the supported minimum, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Input is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value was looked up in a row it does not belong to.
    #[error("value {value} is not an element of row {row}")]
    NotInRow { row: u64, value: u128 },

    /// A computation would leave 128-bit range (or a primality query would
    /// leave the supported 64-bit range).
    #[error("value exceeds the supported arithmetic width")]
    WidthExceeded,

    /// The active set for this m is empty, so the requested quantity
    /// (GCD quotient) is undefined.
    #[error("active set is empty (no prime between m^2 and (m+1)^2) for m = {0}")]
    EmptyActiveSet(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
