use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid functions live on different tori ({left} vs {right})")]
    ConfigMismatch { left: String, right: String },

    #[error("expected {expected}-form grid function, found {found}")]
    WrongForm {
        expected: &'static str,
        found: &'static str,
    },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("scale {scale} is below resolution: at least 4 samples (>= {min}) required")]
    Resolution { scale: f64, min: f64 },

    #[error("curve displacement {displacement} at scale {scale} wraps around the torus of circumference {circumference}")]
    WrapAround {
        scale: f64,
        displacement: f64,
        circumference: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of representable range: {0}")]
    Range(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
