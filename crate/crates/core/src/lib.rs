//! Content/style disentangled autoencoding and style transfer for 3D shapes.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod training;
pub mod nets;

pub use error::{Error, Result};
