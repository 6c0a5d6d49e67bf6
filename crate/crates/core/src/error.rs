use thiserror::Error;

/// Errors raised by the perturbation-theory routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level {level} out of range for dimension {dim}")]
    InvalidLevel { level: usize, dim: usize },

    #[error("eigenvalue {level} is degenerate (gap {gap:.3e} below tolerance {tol:.3e})")]
    DegenerateLevel { level: usize, gap: f64, tol: f64 },

    #[error("shift {shift} collides with eigenvalue {eigenvalue} (index {index})")]
    SingularShift { shift: f64, eigenvalue: f64, index: usize },

    #[error("Neumann series diverges: |dlambda|*||K|| = {value:.3e} >= 1")]
    SeriesDiverges { value: f64 },

    #[error("both arguments of the relative distance vanish")]
    BothZero,

    #[error("z = {re}+{im}i is within {distance:.3e} of the spectrum")]
    SpectrumHit { re: f64, im: f64, distance: f64 },

    #[error("perturbation order {0} is not supported (max 3)")]
    UnsupportedOrder(usize),

    #[error("sum of coefficients vanishes ({0:.3e})")]
    SumAlphaZero(f64),

    #[error("gap assumption violated: {0}")]
    GapViolation(String),

    #[error("correction operator is near singular (condition number {0:.3e})")]
    NearSingularCorrection(f64),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operator {index} is not unitary (defect {defect:.3e})")]
    NotUnitary { index: usize, defect: f64 },

    #[error("operator {index} does not commute with H0 (commutator norm {norm:.3e})")]
    DoesNotCommute { index: usize, norm: f64 },

    #[error("weighted Gram matrix is ill conditioned (condition number {0:.3e})")]
    IllConditionedGram(f64),

    #[error("contour quadrature did not converge (last difference {0:.3e})")]
    NoConvergence(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid potential configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
