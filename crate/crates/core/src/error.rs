use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `ln(4N/β) ≥ 2` (or its restarted analogue) does not hold.
    #[error("log condition violated{}: ln(4N/beta) = {value:.6} < 2 (N = {n}, beta = {beta})", stage_suffix(*.stage))]
    LogCondition {
        value: f64,
        n: u64,
        beta: f64,
        stage: Option<usize>,
    },

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {what} at iteration {k}")]
    NonFinite { k: u64, what: &'static str },

    #[error("Hölder certificate violated: ratio {ratio:.6e} > bound {bound:.6e}")]
    CertificateViolation {
        ratio: f64,
        bound: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("fixed-point iteration for (N, a) did not settle after {0} rounds")]
    NoFixedPoint(usize),

    #[error("parameter derivation failed: {0}")]
    Unreachable(String),
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(t) => format!(" at restart stage {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::LogCondition { .. }
                | Error::Dimension { .. }
                | Error::NoFixedPoint(_)
                | Error::Unreachable(_)
                | Error::Overflow(_)
        )
    }
}
