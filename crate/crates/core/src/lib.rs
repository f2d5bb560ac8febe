//! Training graph neural networks on localized label sets.
//!
//! When the labeled nodes of a graph are concentrated around one region, the
//! representations a GNN learns for them drift away from those of the rest of
//! the graph. This crate reproduces the regularized APPNP setup that counters
//! the drift: the usual cross-entropy loss is augmented with a central moment
//! discrepancy (CMD) term and a maximum mean discrepancy (MMD) term between
//! the predicted label distributions of training and unlabeled nodes.
//!
//! The pieces, bottom-up:
//!
//! - [`sparse`] and [`graph`]: CSR matrices, symmetric adjacency
//!   normalization and the immutable [`Graph`] container.
//! - [`dataset`]: citation-network text loaders, a stochastic block model
//!   generator, seeded splits and the binary cache format.
//! - [`ppr`]: personalized PageRank (dense solve and power iteration) and the
//!   biased training-set sampler.
//! - [`autodiff`]: dense matrices on a reverse-mode tape, Adam, Glorot init,
//!   checkpoints and a finite-difference gradient checker.
//! - [`discrepancy`]: differentiable CMD and MMD.
//! - [`models`]: APPNP and GCN.
//! - [`experiment`]: the regularized loss, training with early stopping,
//!   multi-trial aggregation, sweeps and report serialization.

pub mod autodiff;
pub mod dataset;
pub mod discrepancy;
mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod models;
pub mod ppr;
pub mod rng;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::Matrix;
pub use sparse::SparseMatrix;
