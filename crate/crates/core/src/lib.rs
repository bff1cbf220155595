//! Compact device, circuit and architecture models for SOT-MRAM based
//! neuromorphic multilayer perceptrons, plus the hardware-aware binarized
//! training loop that produces weights for them.
//!
//! The crate is `no_std` and only needs `alloc`. File IO, configuration and
//! the command line live in the `sotnn` companion crate.
//!
//! Layout, bottom-up:
//!
//! - [`device`]: MTJ resistance and bias-dependent TMR of a single cell.
//! - [`analog`]: differential binary synapse, 2T-2R sigmoidal neuron and the
//!   crossbar layer forward pass.
//! - [`arch`]: control signalling, programming protocol, cycle accounting and
//!   power/area bookkeeping for multi-layer pipelines.
//! - [`train`]: teacher-student binarized training and the ideal-math oracle.
//! - [`data`]: IDX container parsing, normalization and seeded batching.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analog;
pub mod arch;
pub mod data;
pub mod device;
mod error;
pub mod math;
mod matrix;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
