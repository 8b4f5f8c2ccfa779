//! Error type shared by all core modules.

/// Errors produced by core operations.
///
/// `Shape` covers dimension/layout mismatches between parameter vectors,
/// gradients, and network inputs. `Contract` covers violated preconditions
/// (empty batches, stepping a terminal state, provenance mismatches, and
/// non-finite parameter values after an update).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
