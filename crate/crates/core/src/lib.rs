//! Robust secure multi-beam transmit design with artificial noise for mmWave
//! links under active and passive eavesdropping.
//!
//! The pipeline is: build the per-antenna power minimization as a complex
//! semidefinite program ([`robust`]), solve it with the bundled interior-point
//! solver ([`sdp`]), then tighten the eavesdropper SINR tolerances with a
//! smoothed min-max stage ([`minimax`]). [`mvdr`] covers the receive side and
//! [`harness`] drives experiments.

pub mod array;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod minimax;
pub mod mvdr;
pub mod robust;
pub mod sdp;

pub use error::{Error, Result};
