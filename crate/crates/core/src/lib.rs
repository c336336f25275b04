//! Sparse random features and their additive limiting kernels.
//!
//! - [`sparse_features`]: sample sparse feature maps and apply them to data.
//! - [`kernel_oracles`]: exact limiting kernels used as ground truth.
//! - [`regression`]: ridge, kernel ridge and robust readouts.
//! - [`experiments`]: convergence, polynomial test function and corruption studies.

pub mod data;
pub mod error;
pub mod experiments;
pub mod kernel_oracles;
pub mod regression;
pub mod rng;
pub mod sparse_features;

pub use data::Dataset;
pub use error::{Error, Result};
pub use kernel_oracles::KernelSpec;
pub use regression::{KernelRidge, RidgeFit};
pub use sparse_features::{
    build_feature_map, BiasLaw, DegreeLaw, DegreeSpec, Nonlinearity, SparseFeatureMap, WeightDist, WeightLaw,
};
