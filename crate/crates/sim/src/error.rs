use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid cloth: {0}")]
    InvalidCloth(String),
    #[error("no valid hole layout after {0} attempts")]
    GenerationFailed(usize),
    #[error("simulation diverged at step {step}: non-finite state at vertex {vertex}")]
    Diverged { step: usize, vertex: usize },
    #[error("vertex index {index} out of range for {len} vertices")]
    BadIndex { index: usize, len: usize },
    #[error("prediction has {got} points, cloth has {expected}")]
    PredictionLength { got: usize, expected: usize },
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, SimError>;
