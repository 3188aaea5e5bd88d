//! Learning and inference for low-rank nonsymmetric determinantal point
//! processes (NDPPs).
//!
//! Kernels are stored as `L = V Vᵀ + B (D − Dᵀ) Bᵀ`. Everything that touches
//! the full catalog (log-likelihood, gradients, greedy MAP, conditioning) runs
//! in time linear in the catalog size `M`; only `K×K`, `2K×2K`, or
//! subset-sized matrices are ever factorized.

pub mod error;
pub mod eval;
pub mod inference;
pub mod kernel;
pub mod likelihood;
pub mod matcore;
pub mod training;

pub use error::{NdppError, Result};
pub use kernel::{BlockC, InferenceKernel, NdppParams};
pub use matcore::Mat;
