//! Experiment harness for active preference learning: seeded instance
//! generators, preference CSV ingestion, multi-seed batched experiments with
//! CSV traces, and the canonical separation study. The numerical work lives
//! in [`prefdesign_core`], re-exported here as [`core`].

pub use prefdesign_core as core;

pub mod canonical;
pub mod config;
pub mod data;
mod error;
pub mod experiment;
pub mod output;
pub mod synthetic;

pub use error::{HarnessError, Result};
