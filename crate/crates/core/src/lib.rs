//! Partition functions of deformed real, quaternion and complex random
//! matrix ensembles, evaluated as Pfaffian Schur-function series and checked
//! against direct eigenvalue integrals, Haar sampling and fermionic identities.

pub mod error;
pub mod fock;
pub mod hub;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod partitions;
pub mod quad;
pub mod skewlin;
pub mod symfun;
pub mod tauseries;

pub use error::{Error, Result};
pub use linalg::{CMatrix, Matrix, C64};
pub use moments::{EnsembleKind, EnsembleSpec, Family, QuadSettings};
pub use partitions::{enumerate_partitions, Partition};
pub use skewlin::{abar, pfaffian, SkewPair};
pub use symfun::CouplingSeq;
