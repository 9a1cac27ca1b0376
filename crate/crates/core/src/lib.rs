//! Joint matching of attributed multigraph collections.
//!
//! The crate matches every pair of graphs in a collection at once by running a
//! conditional-gradient style ascent on a kernelized pairwise objective and
//! projecting each iterate onto cycle-consistent bulk permutations.  The main
//! entry points are [`synth::generate`] for protocol data, [`affinity`] for
//! turning a collection into the dense operands the solver needs, and
//! [`solver::solve`] for the ascent itself.
//!
//! All numeric code is generic over [`Real`]; `f64` aliases for the common
//! types live at the crate root.

pub mod affinity;
pub mod consistency;
pub mod graphs;
pub mod harray;
pub mod kernels;
pub mod metrics;
pub mod projectors;
pub mod solver;
pub mod synth;
#[cfg(test)]
pub(crate) mod testutil;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numeric modules are generic over.
///
/// `RealField` supplies the linear algebra and elementary functions, the
/// num-traits bounds supply primitive conversions.  Implemented by `f32` and
/// `f64`; the solver and the protocol defaults assume `f64` precision.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Real for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

/// Lossy-but-total conversion from `f64`, for constants and RNG draws.
pub(crate) fn from_f64<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 converts into every Real scalar")
}

pub(crate) fn from_usize<T: Real>(x: usize) -> T {
    T::from_usize(x).expect("usize converts into every Real scalar")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operands whose shapes cannot be combined.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Structurally well-formed input that violates a contract.
    #[error("invalid input: {0}")]
    Validation(String),
    /// Malformed files or documents.
    #[error("parse error: {0}")]
    Parse(String),
    /// Iterative numerics that failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub type FeatureArray3F64 = harray::FeatureArray3<f64>;
pub type FeatureArray3F32 = harray::FeatureArray3<f32>;
pub type GraphCollectionF64 = graphs::GraphCollection<f64>;
pub type KernelSpecF64 = kernels::KernelSpec<f64>;
pub type ProjectorSpecF64 = projectors::ProjectorSpec<f64>;
pub type SolverConfigF64 = solver::SolverConfig<f64>;
pub type SynthSpecF64 = synth::SynthSpec<f64>;
