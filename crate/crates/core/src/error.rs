use thiserror::Error;

/// Errors raised by the solvers, oracles and domain constructors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes of measures, costs, plans or dual points disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// The instance violates a domain invariant (negative mass, bad gamma, ...).
    #[error("invalid instance: {0}")]
    Instance(String),
    /// Arithmetic broke down (overflow, line search that never exits, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A reference oracle gave up before reaching its own stopping rule.
    #[error("oracle failure: {0}")]
    Oracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
