//! Popularity-bias amplification audit for collaborative-filtering
//! recommenders.
//!
//! The crate trains user-based k-NN and non-negative matrix factorization on
//! rating data, splits users into LowPop / MedPop / HighPop groups by how
//! popular the items in their profiles are, and reports per-group accuracy
//! (MAE), genre miscalibration (KL divergence) and popularity lift, together
//! with the correlation between item popularity and recommendation frequency.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the pipeline uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod recommenders;
pub mod scalar;
pub mod stats;
pub mod stratify;
pub mod synth;

pub use error::{Error, Result};
pub use model::{GenreId, ItemId, Rating, UserId};
pub use scalar::Scalar;

pub type Dataset = model::InteractionDataset<f64>;
pub type Matrix = model::SparseMatrix<f64>;
pub type Distribution = model::GenreDistribution<f64>;
pub type Popularity = stratify::PopularityProfile<f64>;
pub type Knn = recommenders::KnnModel<f64>;
pub type Nmf = recommenders::NmfModel<f64>;
pub type RecList = recommenders::RecommendationList<f64>;
pub type MetricRow = metrics::UserMetricRow<f64>;
pub type Report = stats::GroupReport<f64>;
