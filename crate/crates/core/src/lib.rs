//! Multi-view clustering by adaptive weighted kernel non-negative matrix
//! factorization.
//!
//! The crate is organised around the pipeline of an experiment:
//!
//! * [`graph_kernels`]: Gram matrices, similarity graphs, Laplacians, spectral norms.
//! * [`solver`]: the kernel multi-view factorization and its block updates.
//! * [`baselines`]: single-view, concatenated, multi-view and adaptive weighted NMF.
//! * [`metrics`]: accuracy, NMI, Rand and Mirkin indices.
//! * [`data_io`]: CSV datasets, scaling and synthetic generators.
//! * [`experiment`]: config files, grid search, comparisons and reports behind the CLI.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data_io;
pub mod error;
pub mod experiment;
pub mod graph_kernels;
pub mod linalg;
pub mod metrics;
pub mod solver;

pub use data_io::{MultiViewDataset, View};
pub use error::{Error, ErrorCategory, Result};
pub use graph_kernels::{Bandwidth, GraphLaplacian, GramMatrix, KernelSpec};
pub use metrics::MetricsReport;
pub use solver::{FactorizationState, SolverConfig, Weighting};
