//! Representative-day scenario generation.
//!
//! The pipeline turns multi-year hourly load/solar(/wind) series into a
//! handful of representative daily scenarios:
//!
//! 1. [`ingest`] parses hourly CSV data into 24-hour [`DayProfile`]s and
//!    min-max normalizes each variable over the whole dataset.
//! 2. [`dtw`] builds the pairwise day-to-day distance matrix under a
//!    time-normalized multivariate dynamic time warping distance.
//! 3. [`clustering`] groups days with agglomerative hierarchical clustering
//!    (complete or average linkage) on that matrix, or with a Euclidean
//!    K-Means baseline.
//! 4. [`metrics`] scores a clustering with DTW-based separation/cohesion
//!    scores next to the Euclidean Calinski-Harabasz, Davies-Bouldin and
//!    silhouette indices, and sweeps them over a range of cluster counts.
//! 5. [`report`] renders representative profiles with monthly population
//!    histograms as JSON, CSV and SVG.
//!
//! [`synth`] generates seeded synthetic datasets with labeled outlier days,
//! and [`cli`] wires the stages together behind file-based handoff.

pub mod cli;
pub mod clustering;
pub mod dtw;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod synth;
mod util;

pub use clustering::{ClusterModel, Linkage, MergeHistory, Method};
pub use dtw::{DistanceMatrix, DtwOptions};
pub use error::{Error, Result};
pub use ingest::{Dataset, DayProfile};
pub use metrics::{MetricSweep, ValidationReport};
pub use report::ScenarioReport;
