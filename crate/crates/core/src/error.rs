use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NonHermitianInput(f64),
    #[error("symbol is undefined or not real-valued at {0}")]
    SymbolDomainError(f64),
    #[error("requested order {requested} exceeds the symbol's maximal order {max}")]
    OrderExceeded { requested: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid Schatten index {0}")]
    InvalidSchattenIndex(f64),
    #[error("window too small: tail mass {tail:e} exceeds tolerance {tolerance:e}")]
    TailMassError { tail: f64, tolerance: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("operator is not unitary (defect {0:e})")]
    NonUnitary(f64),
    #[error("no admissible Hölder exponents: {0}")]
    InfeasibleExponents(String),
    #[error("work estimate {work} exceeds the configured cap {cap}")]
    BudgetExceeded { work: u128, cap: u128 },
    #[error("operation not supported by this backend: {0}")]
    BackendMismatch(&'static str),
    #[error("mode {mode} leaves the representative band")]
    BandOverflow { mode: String },
    #[error("negative time {0} for a forward-only semigroup")]
    NegativeTime(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("derivative-growth certificate violated at block {block}: {observed:e} > {certified:e}")]
    CertificateViolation { block: usize, observed: f64, certified: f64 },
    #[error("symbol must vanish at the origin, F(0) = {0:e}")]
    SymbolHypothesisError(f64),
    #[error("Picard iteration does not contract (factor {0})")]
    NoContraction(f64),
    #[error("Picard iterate left the admissible ball: {norm} > {radius}")]
    BallViolation { norm: f64, radius: f64 },
    #[error("blow-up detected at t = {time}: norm {norm:e}")]
    BlowUpDetected { time: f64, norm: f64 },
    #[error("empirical constants missing: {0}")]
    MissingBaseline(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("closed-form derivative of order {order} disagrees with finite differences at x = {at}")]
    DerivativeMismatch { order: usize, at: f64 },
}
