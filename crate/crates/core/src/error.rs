use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("scan index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("scan index {0} is not in the false-association set")]
    IndexNotInSet(usize),

    #[error("invalid false-association set: {0}")]
    InvalidSet(String),

    #[error("degenerate geometry (condition estimate {condition:.3e})")]
    DegenerateGeometry { condition: f64 },

    #[error("singular Gram matrix for {n_steps} indicator steps")]
    SingularGram { n_steps: usize },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error:.3e}")]
    NonConvergence { estimate: f64, error: f64 },

    #[error("unsupported quadrature order {0}")]
    UnsupportedOrder(usize),

    #[error("degenerate chain for p_fa = {0}")]
    DegenerateChain(f64),

    #[error("expected number of visits is infinite for p_fa = 0")]
    InfiniteExpectation,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}
