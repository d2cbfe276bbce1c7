//! Regularized distance functions `D = R^{-1/α}` built from singular kernel
//! sums over discrete Ahlfors-regular measures, together with oscillation
//! diagnostics, exactness tests for kernels, and numerical synthesis of
//! distance-orthogonal kernels.

pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod exactness;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod measures;
pub mod num;
pub mod par;
pub mod quad;
pub mod special;
pub mod synthesis;

pub use error::{Error, Result};
pub use kernels::Kernel;
