//! Equilibrium (KMS) states of the Toeplitz algebra of a finite directed graph.
//!
//! The crate computes critical inverse temperatures, the extremal KMS states
//! of type I and those supported at infinity, and the decomposition of limits
//! of type-I states at the critical temperature into extremal states.
//! Everything is reduced to linear algebra on the integer adjacency matrix.

// `!(x > y)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod error;
pub mod extrapolate;
pub mod fixtures;
pub mod genfun;
pub mod graph;
pub mod io;
pub mod kms;
pub mod oracle;
pub mod report;
pub mod spectral;

pub use error::{KmsError, Result};
pub use genfun::PoleClass;
pub use graph::{CondensationGraph, Graph, SccDecomposition, VertexSet};
pub use kms::{HarmonicVector, KmsStructure, StateVector, Tolerances};
