pub mod error;
pub mod estimator;
pub mod frames;
pub mod liouville;
pub mod quadrature;
pub mod spin;

pub use error::{Error, Result};
