//! Quantization kernels for INT4 weight-activation matrix multiplication with
//! runtime activation smoothing (RS) and its rotated variant (RRS).
//!
//! The crate is a functional model rather than a device kernel: every matmul
//! back-end runs on the CPU with pinned summation orders so that algebraic
//! identities can be checked to tight tolerances.
//!
//! Module map:
//! - [`tensor`], [`synthetic`], [`tensor_file`]: dense matrices, seeded outlier
//!   generators and the `RRST` binary format.
//! - [`quant`]: symmetric round-to-nearest quantization.
//! - [`rotation`]: Sylvester Hadamard rotations.
//! - [`smooth`]: runtime smoothing plans and the SmoothQuant baseline.
//! - [`gemm`]: float oracle, naive and fused-blocked quantized GEMMs, method pipelines.
//! - [`analysis`]: smoothness metrics, spike census and the victim simulation.
//! - [`workload`]: canonical seeded workloads shared by tests and the CLI.

pub mod analysis;
pub mod error;
pub mod gemm;
pub mod quant;
pub mod rotation;
pub mod smooth;
pub mod stats;
pub mod synthetic;
pub mod tensor;
pub mod tensor_file;
pub mod workload;

pub use error::{Error, Result};
pub use tensor::{Matrix, Role};
