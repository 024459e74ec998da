//! Digital-twin modelling and state estimation for multi-phase distribution
//! networks.

pub mod circuit_model;
pub mod component_admittance;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod network_matrix;
pub mod sim_oracle;
pub mod sync_analysis;
pub mod waveform;

#[cfg(test)]
mod test_support;

pub use error::{Error, ErrorFamily, Result};
