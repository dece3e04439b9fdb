//! Bias-variance decompositions for g-Bregman divergences.

// `!(x >= lo)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centroids;
pub mod decomposition;
pub mod divergences;
pub mod domain;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod loss;
pub mod optimize;
pub mod uniqueness;

pub use divergences::{catalog, CatalogEntry, GBregmanDivergence};
pub use domain::Domain;
pub use ensemble::{Point, WeightedEnsemble};
pub use error::{Error, Result};
pub use loss::LossFunction;
