//! Simulation and analysis toolkit for slow beams of massive neutral molecules.

pub mod cli;
pub mod config;
pub mod cooling;
pub mod error;
pub mod focus;
pub mod numeric;
pub mod optics;
pub mod phys;
pub mod report;
pub mod rng;
pub mod selector;
pub mod source;
pub mod sublimation;
pub mod table;
pub mod units;

pub use error::{ConfigError, Error, Result};
