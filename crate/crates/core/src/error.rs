use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("non-finite value produced by {update} at iteration {iteration}")]
    NonFinite { update: &'static str, iteration: usize },

    #[error("instance too large for {what}: {detail}")]
    TooLarge { what: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, len })
    }
}
