use num_complex::Complex64;
use thiserror::Error;

use crate::quad::Rejection;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pfaffian undefined for odd order {0}")]
    OddOrder(usize),
    #[error("matrix is not skew-symmetric (relative defect {defect:.3e})")]
    NotSkew { defect: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("combinatorial pfaffian is limited to dimension {max}, got {dim}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("moment index {index} outside table [{base}, {end}); need a table covering index {index}")]
    IndexOutOfRange { index: i64, base: i64, end: i64 },
    #[error("partition of length {length} does not fit {n} shifted parts")]
    PartitionTooLong { length: usize, n: usize },
    #[error("parts must be weakly decreasing: {0:?}")]
    NotAPartition(Vec<u32>),
    #[error("shifted indices must be strictly decreasing and nonnegative: {0:?}")]
    BadShiftedIndices(Vec<i64>),
    #[error("negative order {0}")]
    NegativeOrder(i64),
    #[error("parameters rejected: {0}")]
    Rejected(Rejection),
    #[error("quadrature did not converge: estimate {estimate}, residual {residual:.3e}")]
    NoConvergence { estimate: Complex64, residual: f64 },
    #[error("Hirota shift points must be distinct")]
    CoincidentShift,
    #[error("Hirota shift points must be nonzero")]
    ZeroShift,
    #[error("kernel points must be distinct (p[{0}] == p[{1}])")]
    CoincidentPoints(usize, usize),
    #[error("tau vanishes at base point")]
    TauVanishes,
    #[error("{what} supports at most {max}, got {got}")]
    Unsupported { what: &'static str, max: usize, got: usize },
    #[error("mode {mode} outside window [{lo}, {hi})")]
    OutsideWindow { mode: i64, lo: i64, hi: i64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl From<Rejection> for Error {
    fn from(r: Rejection) -> Self {
        Error::Rejected(r)
    }
}
