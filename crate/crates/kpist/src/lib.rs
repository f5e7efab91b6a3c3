//! Inverse spectral transform for the KP-II equation with data periodic in x
//! and decaying in y.

pub mod cli;
pub mod config;
pub mod cylinder;
pub mod error;
pub mod heatjost;
pub mod inverse;
pub mod io;
pub mod kpsolver;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
