pub mod channel;
pub mod config;
mod error;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub mod assignment;
pub mod features;
pub mod phy;
pub mod harness;
