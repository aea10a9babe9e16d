use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its physical or mathematical domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transfer matrix is not unitary (max |UU† - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("photon number {requested} exceeds the Fock oracle limit {limit}")]
    PhotonLimit { requested: usize, limit: usize },

    #[error("need at least {required} distinct intensities, got {given}")]
    InsufficientIntensities { required: usize, given: usize },

    #[error("ill-conditioned Poisson system in {context} (condition number {condition:e})")]
    IllConditioned { context: String, condition: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors raised by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::NotUnitary { .. }
        )
    }
}
