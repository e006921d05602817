use thiserror::Error;

/// Errors produced while constructing codes, analysing spectra or decoding.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),

    /// A power set handed to the NCP constructor is a cyclic run of integers,
    /// which makes the code equivalent to a USPC.
    #[error("power set {0:?} is cyclically consecutive (equivalent to a USPC)")]
    RejectedAsUspc(Vec<usize>),

    #[error("underdetermined: {retained} retained columns for {rows} unknowns")]
    Underdetermined { retained: usize, rows: usize },

    #[error("ill-conditioned sub-frame (condition number {kappa:.3e})")]
    IllConditioned { kappa: f64 },

    /// No sampled candidate passed validation within the attempt budget.
    #[error("no valid {family} candidate after {attempts} attempts")]
    NoValidCandidate { family: String, attempts: usize },

    #[error("frame file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameters(msg.into()))
}
