//! Paddy-field soil moisture estimation from limited weather data.
//!
//! Two small sigmoid networks are chained: one maps daily air temperature
//! extremes and mean to reference evapotranspiration, the other maps
//! evapotranspiration, precipitation, crop coefficient and the previous
//! day's soil moisture to today's soil moisture. A Hargreaves / bucket
//! water-balance simulator provides synthetic ground truth for training and
//! validation.

pub mod ann;
pub mod artifact;
pub mod crop;
pub mod error;
pub mod evapo;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod moisture;
pub mod norm;
pub mod synth;

pub use error::{Error, Result};
