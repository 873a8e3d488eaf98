use alloc::string::String;

/// Errors raised by the solver components.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller broke an operation's precondition (shape, ordering, selector).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Derivative order above two was requested.
    #[error("unsupported derivative order {0} (at most 2)")]
    UnsupportedOrder(usize),
    /// The requested quantity is not defined for this formulation.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The signal has no spectral power so the cumulative spectrum is undefined.
    #[error("degenerate spectrum: total weighted power is zero")]
    DegenerateSpectrum,
    /// A phase needs an artifact from an earlier phase that was not supplied.
    #[error("sequencing error: {0}")]
    Sequencing(String),
    /// Non-finite values appeared in an input or intermediate quantity.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A linear system could not be solved.
    #[error("solver error: {0}")]
    Solver(String),
    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
