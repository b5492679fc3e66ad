//! Linearized quasicontinuum operators for a one-dimensional chain with
//! nearest and next-nearest neighbour interactions, together with the
//! spectral analysis and Krylov solvers used to study them.
//!
//! Lattice-level code is generic over [`Real`] (`f32` or `f64`). Spectral
//! routines call LAPACK and work in `f64`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod csv;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod potentials;
pub mod scalar;
pub mod spectral;

pub use chain::{ChainParams, CurvatureVector, GradientVector, InteriorVector, LaplacianSolver};
pub use csv::{fmt17, CsvTable};
pub use error::{QcError, Result};
pub use krylov::{GmresConfig, IterationTrace, Variant};
pub use ndarray_linalg::c64;
pub use operators::{assemble, ModelKind, QcOperator};
pub use potentials::{HomogeneousState, LennardJones, Morse, PairPotential};
pub use scalar::Real;

pub type Params = ChainParams<f64>;
pub type State = HomogeneousState<f64>;
pub type Operator = QcOperator<f64>;
pub type Vector = InteriorVector<f64>;

pub type Params32 = ChainParams<f32>;
pub type State32 = HomogeneousState<f32>;
pub type Operator32 = QcOperator<f32>;
pub type Vector32 = InteriorVector<f32>;
