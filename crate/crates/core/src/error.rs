use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its admissible domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Every log-weight in a cloud is -inf; the model assigns zero density
    /// to the data at the current step.
    #[error("degenerate weights at step {step}: all particles have zero weight")]
    DegenerateWeights { step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// A finite Feynman-Kac flow hit a zero normalizer.
    #[error("degenerate potential path at step {step}")]
    DegeneratePotential { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
