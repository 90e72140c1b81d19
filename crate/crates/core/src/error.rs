use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be at least 1, got {0}")]
    ExtensionDegree(u32),
    #[error("field of order {p}^{e} is too large")]
    FieldTooLarge { p: u64, e: u32 },
    #[error("attempted to invert zero")]
    ZeroInverse,
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("zero test on a value that is only known to be zero modulo t^{0}")]
    InexactZero(i64),
    #[error("degenerate lattice: {0}")]
    Degenerate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("not a vertex of the building (divisors {0:?})")]
    NotVertex(Vec<i64>),
    #[error("not a special vertex (divisors {0:?})")]
    NotSpecial(Vec<i64>),
    #[error("not a similitude: {0}")]
    NotSimilitude(String),
    #[error("subspace is not Lagrangian")]
    NotLagrangian,
    #[error("size guard exceeded for {what}: {size} > {limit}")]
    SizeGuard { what: &'static str, size: u128, limit: u128 },
    #[error("Borel orbit without a coordinate representative (orbit of size {0})")]
    OrbitWithoutRepresentative(usize),
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("power iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
