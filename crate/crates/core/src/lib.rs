//! Probabilistic graph clustering by low-rank doubly stochastic matrix
//! decomposition (DCD).
//!
//! A sparse symmetric similarity graph `A` is approximated by the two-step
//! random-walk matrix
//!
//! ```text
//! Â_ij = Σ_k W_ik W_jk / Σ_v W_vk
//! ```
//!
//! where `W_ik = P(k|i)` are soft cluster assignments. `W` is learned by
//! minimizing the generalized KL divergence `D(A‖Â)` with a relaxed
//! majorization-minimization update that drives the rows of `W` onto the
//! probability simplex through automatically chosen Lagrange multipliers.
//!
//! The crate is organised along the pipeline:
//!
//! - [`graph`]: KNN graph construction and validation of weighted input.
//! - [`dcd`]: objective, gradients, multiplicative update and the run loop.
//! - [`init`]: spectral (normalized cut) seeding, indicator perturbation and
//!   the Dirichlet-prior multi-start.
//! - [`eval`]: hard label readout and purity.
//! - [`io`] and [`cli`]: file formats and the `dcd` command-line tool.

pub mod cli;
pub mod dcd;
pub mod error;
pub mod eval;
pub mod graph;
pub mod init;
pub mod io;

pub use dcd::{AssignmentMatrix, DcdConfig, GradientSplit, MultiplierState, RunTrace};
pub use error::{Error, Result};
pub use eval::{hard_labels, purity, GroundTruth, HardClustering};
pub use graph::{knn_graph, validate_graph, EdgeOrientation, FeatureMatrix, SparseSimilarity};
pub use init::{multi_start, MultiStartConfig, MultiStartResult};
