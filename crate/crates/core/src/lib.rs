//! Omniscient video super-resolution.
//!
//! A small reverse-mode autodiff tensor library, the three-stream progressive
//! fusion generator, and the hidden-state schedulers for the iterative,
//! recurrent, hybrid and omniscient (local and global) frameworks, together
//! with the training loop pieces and the evaluation metrics.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature enables
//! runtime CPU detection in the GEMM kernels and `parallel` spreads batch
//! lanes over a rayon pool with fixed-order reductions, so results do not
//! depend on the number of worker threads.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod autograd;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod ops;
pub mod scalar;
pub mod scheduler;
pub mod tensor;
pub mod training;

pub use autograd::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use generator::{Framework, Model, ModelConfig, RefineMode, UpscaleWidth};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
