//! Statistical learning on attributed graphs viewed as points of the
//! quotient of a matrix space by vertex permutations.
//!
//! * [`graph`]: dense matrix representatives, padding, the permutation action.
//! * [`alignment`]: optimal alignment kernel, intrinsic metric, edit distance.
//! * [`gendiff`]: witness-based generalized gradients of the non-smooth losses.
//! * [`sgg`]: projected stochastic generalized gradient iteration.
//! * [`learners`]: mean graph, structure quantization, orbifold adaline.
//! * [`datagen`]: reproducible synthetic graph distributions.
//! * [`experiments`] and [`cli`]: runnable experiments with CSV/JSON output.

pub mod alignment;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod gendiff;
pub mod graph;
pub mod io;
pub mod learners;
pub mod sgg;

pub use alignment::{AlignmentResult, SolverConfig, SolverMode};
pub use error::{Error, Result};
pub use graph::{AttributeVector, AttributedGraph, GraphDataset, Permutation};
