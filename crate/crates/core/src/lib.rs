//! Transition-conditioned image-to-image translation at desk scale.
//!
//! The crate trains a generator `G(x, t)` that applies an explicit
//! *transition* vector `t` to an input image, together with a stochastic
//! transition encoder `E(x, y)`, three discriminators (image realism,
//! transition realism, triplet matching) and the full nine-term objective.
//! Synthetic tasks with closed-form attribute oracles make the consistency
//! properties checkable end to end.
//!
//! All numerics are generic over the scalar type ([`scalar::Scalar`]);
//! training normally runs in `f32` while gradient verification runs in
//! `f64`. Concrete aliases for the common choices live at the crate root.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod losses;
pub mod networks;
pub mod rng;
pub mod scalar;
pub mod tasks;
pub mod tensor;
pub mod trainer;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default training precision.
pub type TrainF = f32;
/// Precision used by gradient checks and numeric oracles.
pub type CheckF = f64;

/// Tape over the default training precision.
pub type Tape32 = tensor::Tape<f32>;
/// Tape over the verification precision.
pub type Tape64 = tensor::Tape<f64>;
