//! Change-point detection for segment-wise autoregressive time series.
//!
//! The crate has three detector families built on a shared numeric kernel:
//!
//! - [`segment`]: exact dynamic programming or ordered-k-means minimization
//!   of within-segment quadratic loss, with penalized selection of the
//!   number of change points (constant / log log N / log N penalty terms).
//! - [`multi_window`]: estimates autoregressive filters on disjoint windows
//!   at several sizes, detects changes in the resulting coefficient
//!   sequences, and aggregates per-index scores into peak ranges.
//! - [`baseline`]: binary segmentation driven by cumulated AR prediction
//!   error, used for comparisons.
//!
//! [`synth`] and [`experiment`] provide the seeded generators and the Monte
//! Carlo harness used to measure detection frequencies and runtime scaling.

pub mod ar;
pub mod baseline;
pub mod error;
pub mod experiment;
pub mod multi_window;
pub mod segment;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use series::{default_min_segment_len, Segmentation, SeriesStats, TimeSeries};
