//! Centerline extraction by minimal paths whose edge weights are adapted
//! on the fly by a patch classifier.

pub mod classifier;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod minpath;
pub mod pathcnn;
pub mod pathgeom;
pub mod pipeline;
pub mod raster;
pub mod tubularity;

pub use error::{Error, Result};
