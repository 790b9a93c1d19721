//! Rough differential equations on embedded manifolds.
//!
//! Truncated tensor algebra, rough path drivers, log-ODE integration of rough
//! differential equations on manifolds, and Cartan development on frame
//! bundles.

pub mod cartan;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod rde;
pub mod roughpath;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::TruncatedTensor;
