//! Finite-scale constructions relating fibred coarse embeddings of coarse
//! disjoint unions to negative-type kernels.
//!
//! The crate is organised bottom-up:
//!
//! * [`metric_space`]: integer graph metrics, entourages, coarse disjoint unions.
//! * [`box_space`]: finite groups, Cayley graphs, box spaces and invariant means.
//! * [`kernels`]: negative/positive type tests, the Schoenberg transform,
//!   embedding extraction, control envelopes and scale families.
//! * [`fibred`]: fibred coarse embeddings, their validation and generators.
//! * [`gluing`]: annular decompositions, square-root partitions of unity,
//!   glued positive-type kernels and the truncated proper function.
//!
//! Kernel values and chart coordinates are generic over [`Scalar`]; the exact
//! generators work in `i64` and the eigenvalue machinery in `f32`/`f64`.

pub mod box_space;
pub mod error;
pub mod fibred;
pub mod gluing;
pub mod io;
pub mod kernels;
pub mod metric_space;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub use box_space::{BoxSpace, FiniteGroup, GeneratingSet, GroupElement};
pub use fibred::{AffineIsometry, FibredEmbedding, FceReport};
pub use gluing::{AnnularDecomposition, ProperFunctionApprox, Schedule, SqrtPartition};
pub use kernels::{ControlFunctions, Kernel, ScaleFamily};
pub use metric_space::{CoarseUnion, Dist, Entourage, Metric, MetricSpace};

/// Double-precision kernel, the default for Schoenberg transforms and gluing.
pub type Kernel64 = Kernel<f64>;
/// Single-precision kernel.
pub type Kernel32 = Kernel<f32>;
/// Exact integer kernel, as produced by the cycle and large-girth generators.
pub type KernelExact = Kernel<i64>;

pub type ScaleFamily64 = ScaleFamily<f64>;
pub type ScaleFamilyExact = ScaleFamily<i64>;

pub type FibredEmbedding64 = FibredEmbedding<f64>;
pub type FibredEmbeddingExact = FibredEmbedding<i64>;

pub type AffineIsometry64 = AffineIsometry<f64>;
pub type AffineIsometryExact = AffineIsometry<i64>;
