use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fee arithmetic overflow")]
    Overflow,

    #[error("insufficient bids: need at least {needed}, got {got}")]
    InsufficientBids { needed: usize, got: usize },

    #[error("bid {bid} is below the minimum fee {min_fee}")]
    BidBelowMinimum { bid: u64, min_fee: u64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("power-law fit failed: {0}")]
    Fit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate transaction id {tx_id} in block {height}")]
    DuplicateTx { height: u64, tx_id: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
