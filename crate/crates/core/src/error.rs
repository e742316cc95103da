use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0} where a finite real is required")]
    NonFinite(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weight {value} outside the box [-{q}, {q}]")]
    WeightOutOfBox { value: f64, q: f64 },

    #[error("bias {value} outside [-{bound}, {bound}]")]
    BiasOutOfRange { value: f64, bound: f64 },

    #[error("coefficient {value} outside [-{q}, {q}]")]
    CoefficientOutOfBox { value: f64, q: f64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("unknown quadrature scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown zoo target `{0}`")]
    UnknownTarget(String),

    #[error("target `{target}`: parameter `{param}`: {message}")]
    TargetParam {
        target: String,
        param: String,
        message: String,
    },

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("epsilon {0} outside (0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
