use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex {vertex} out of range for a graph with {vertex_count} vertices")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) has value {x}, expected a number in [0, 1]")]
    EdgeValue { u: usize, v: usize, x: f64 },
    #[error("vertex {vertex} has load {load} > 1")]
    Overloaded { vertex: usize, load: f64 },
    #[error("invalid instance family: {0}")]
    InvalidFamily(String),
    #[error("invalid odd girth {0}: expected an odd integer >= 3")]
    InvalidGirth(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample mode mismatch: expected {expected} arrivals")]
    ModeMismatch { expected: &'static str },
    #[error("estimate table has phases 0..{filled}, phase {requested} requested")]
    MissingPhase { requested: usize, filled: usize },
    #[error("quadrature did not converge to tolerance {tol} (estimate {estimate})")]
    Quadrature { tol: f64, estimate: f64 },
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
