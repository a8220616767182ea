use thiserror::Error;

/// Crate-wide error type. Operations that can reject their input return
/// `Result<T>`; pure arithmetic on already-validated values does not.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("mismatched scalars: (ell={0}, precision={1}) vs (ell={2}, precision={3})")]
    MismatchedScalars(u64, u32, u64, u32),

    #[error("division by zero (or by a value indistinguishable from zero at precision)")]
    DivisionByZero,

    #[error("signature mismatch between operands")]
    SignatureMismatch,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("root of unity at working precision: {0}")]
    RootOfUnity(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
