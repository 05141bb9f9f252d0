//! Supervised convex biclustering.
//!
//! Rows (instances) and columns (features) of a data matrix are clustered
//! together by shrinking their centroids with an elastic-net fusion penalty
//! whose pair weights are guided by a continuous target. The fitted
//! checkerboard then predicts the target for new instances.
//!
//! The usual pipeline is [`data::load_csv`] → [`data::center_columns`] →
//! [`solver::fit`] → [`biclusters::extract`] → [`predict::predict`].

pub mod biclusters;
pub mod config;
pub mod data;
pub mod error;
pub mod heatmap;
pub mod metrics;
pub mod predict;
pub mod simulate;
pub mod solver;
pub mod weights;

pub use biclusters::{extract, group_centroids, BiclusterModel, Partition};
pub use config::{FitConfig, Scenario};
pub use data::{center_columns, load_csv, DataMatrix, TargetVector};
pub use error::{Result, SubicError};
pub use metrics::{adjusted_rand_index, cell_partition, rand_index};
pub use predict::{predict, Prediction};
pub use solver::{fit, objective_value, FitResult};
pub use weights::{build_weights, WeightSet};
