//! Effective degrees of freedom for kernel density estimation.
//!
//! The crate computes the oracle and empirical EDoF of a kernel density
//! estimate through kernel sensitivity matrices built on orthonormal polynomial
//! sequences, the competing EDoF estimates, asymptotic variance of the
//! empirical EDoF, the mean Kullback–Leibler decomposition for the all-Gaussian
//! case, and bandwidth selection built on top of them.

pub mod amkld;
pub mod bandwidth;
pub mod data;
pub mod edof;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod orthopoly;
pub mod sensitivity;
pub mod smoothing;
mod util;

pub use data::{Grid, OracleDensity, QuadSpec, QuadratureRule, RngStream, Sample, Scheme};
pub use error::{Error, Result};
pub use kernels::{Kernel, KernelFamily};
