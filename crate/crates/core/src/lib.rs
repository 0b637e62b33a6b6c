//! Scaling analysis of geolocated Twitter activity against census
//! population on regular grids.

pub mod anomaly;
pub mod cli;
pub mod error;
pub mod geojson;
pub mod geometry;
pub mod grid;
pub mod ingest;
pub mod pipeline;
pub mod scaling;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
