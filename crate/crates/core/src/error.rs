use thiserror::Error;

pub type Result<T> = std::result::Result<T, KmsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KmsError {
    #[error("empty graph")]
    EmptyGraph,

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("vertex index {index} out of range for a graph with {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate vertex identifier `{0}`")]
    DuplicateVertex(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has a negative or non-finite entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("matrix not irreducible")]
    NotIrreducible,

    #[error("spectral radius is zero")]
    ZeroSpectralRadius,

    #[error("power iteration did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("resolvent at or beyond pole (z = {z}, spectral radius = {rho})")]
    ResolventAtPole { z: f64, rho: f64 },

    #[error("linear system is numerically singular")]
    Singular,

    #[error("series divergent: beta = {beta} does not exceed the threshold {threshold}")]
    SeriesDivergent { beta: f64, threshold: f64 },

    #[error("below critical temperature: beta = {beta} must exceed beta_v = {beta_v}")]
    BelowCriticalTemperature { beta: f64, beta_v: f64 },

    #[error("vertex `{vertex}` has no positive critical inverse temperature (beta_v = {beta_v})")]
    NoPositiveCriticalTemperature { vertex: String, beta_v: f64 },

    #[error("not a strongly connected component of the graph")]
    NotAComponent,

    #[error("component {0} is not a minimal component with spectral radius > 1")]
    NotMinimal(String),

    #[error("vector is not harmonic: {0}")]
    NotHarmonic(String),

    #[error("no path from `{from}` to `{to}`")]
    NoPath { from: String, to: String },

    #[error("condensation graph contains a cycle")]
    Cyclic,

    #[error(
        "support mismatch: combinatorial support {combinatorial:?} differs from numeric support {numeric:?}"
    )]
    SupportMismatch {
        combinatorial: Vec<String>,
        numeric: Vec<String>,
    },

    #[error("extrapolation residual {residual:e} above tolerance {tolerance:e} after {levels} levels")]
    Extrapolation {
        residual: f64,
        tolerance: f64,
        levels: usize,
    },

    #[error("decomposition invariant violated: {0}")]
    Invariant(String),

    #[error("path enumeration guard: {0}")]
    EnumerationGuard(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl KmsError {
    /// Validation failures map to exit code 2, the support cross-check to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            KmsError::SupportMismatch { .. } => 3,
            _ => 2,
        }
    }
}
