//! Time-series classification on top of frozen sequence-model hidden states.
//!
//! The pipeline turns each variate of a sample into per-layer hidden states
//! ([`provider`]), pools them into a fixed-size vector ([`aggregate`]),
//! optionally appends patch statistics and a differenced-series embedding
//! ([`augment`]), and trains a light classifier head ([`classify`]). The
//! [`dtw`] module provides the elastic-distance baseline, and [`evaluate`]
//! covers metrics, the benchmark runner, rank statistics and reporting.

pub mod aggregate;
pub mod augment;
pub mod classify;
pub mod config;
pub mod dataset;
pub mod dtw;
mod error;
pub mod evaluate;
pub mod provider;
pub mod seed;

pub use error::{Error, Result};
