//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received parameters outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve hit a (numerically) degenerate system, which for the
    /// contact solvers means the contact condition failed at the point.
    #[error("degenerate system at {context}: residual {residual:.3e}")]
    Degeneracy { context: String, residual: f64 },

    /// A trajectory left a non-periodic chart domain.
    #[error("trajectory escaped the chart domain at t = {time:.6} (coordinate {coordinate}, value {value:.6})")]
    Escape {
        time: f64,
        coordinate: usize,
        value: f64,
    },

    /// An operation required a basic generator (`xi . H = 0`).
    #[error("{context}: generator is not basic (xi-derivative residual {residual:.3e})")]
    NotBasic { context: String, residual: f64 },

    /// A built-in was requested for a chart that does not support it.
    #[error("unsupported chart for {0}")]
    UnsupportedChart(String),

    /// Expression parsing / evaluation failed.
    #[error("expression error: {0}")]
    Expr(String),

    /// Configuration file was invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
