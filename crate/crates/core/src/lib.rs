//! Bottom-up objectness estimation for 3D point clouds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjacency;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod oversegment;
pub mod pipeline;
pub mod predictor;
pub mod regret_grouping;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
