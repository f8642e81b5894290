//! Floating-point secure multiparty computation.
//!
//! Parties hold additive shares of real matrices masked by uniform noise of
//! half-width `gamma`. Products go through Beaver triples and a single
//! all-reduce collective; nonlinear functions are built from additions and
//! multiplications only, so the same code runs in the clear or on shares.

pub mod approx;
pub mod arith;
pub mod beaver;
pub mod error;
pub mod glm;
pub mod ingest;
pub mod leakage;
pub mod runtime;
pub mod sharing;
pub mod tensor;

pub use error::{Error, Result};
pub use sharing::{NoiseSpec, SecretTensor};
pub use tensor::{RandomSource, Tensor};
