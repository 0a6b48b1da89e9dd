//! Numerical toolkit for the index Whittaker transform: kernel evaluation,
//! transforms of functions and measures, the positive product-formula
//! convolution, infinitely divisible laws and the associated processes.

pub mod convolve;
pub mod error;
pub mod infdiv;
pub mod moments;
pub mod processes;
pub mod quad;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use quad::QuadConfig;
pub use specfun::{Order, OrderKind, Params, Route};

/// Crate version, written into output headers and manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
