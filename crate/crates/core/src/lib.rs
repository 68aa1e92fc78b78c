//! Counterfactual feature-change importance for tabular binary classifiers.
//!
//! This crate is `no_std` (it needs `alloc`). It holds everything that is
//! pure computation:
//!
//! * [`dataset`]: feature schemas, encoded instances, seeded splits.
//! * [`fixture`]: synthetic datasets with a planted label rule.
//! * [`model`], [`forest`], [`knn`]: the [`Predictor`](model::Predictor)
//!   interface plus a bagged tree ensemble and a k-nearest-neighbour model.
//! * [`cfgen`]: nearest-unlike-neighbour and sparse random-search
//!   counterfactual generators.
//! * [`flex`]: per-instance change frequencies with range-relative
//!   thresholds, relative magnitudes, and their aggregation.
//! * [`regional`]: Hamming/mixed distances, region construction, mode-shift
//!   diagnostics and regional-vs-global correlation.
//! * [`baseline`]: pooled change-count importance with an absolute tolerance.
//! * [`rank`]: competition rankings and cross-method rank comparison.
//!
//! File formats, the subprocess model adapter and the command line live in
//! the `flexcf` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod cfgen;
pub mod dataset;
mod error;
pub mod fixture;
pub mod flex;
pub mod forest;
pub mod knn;
pub mod model;
pub mod rank;
pub mod regional;
pub mod stats;

pub use error::{Error, Result};
