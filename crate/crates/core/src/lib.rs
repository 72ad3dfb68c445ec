//! Federated learning with compressive-sensing compression of model updates
//! and client-level differential privacy.

pub mod accountant;
pub mod bpdn;
pub mod codec;
pub mod dct;
pub mod error;
pub mod fl;
pub mod ml;
pub mod owlqn;
pub mod quadrature;
pub mod rng;
pub mod secure_agg;
pub mod sim;

pub use error::{Error, Result};
