//! Perturbation analysis of V-geometrically ergodic Markov kernels on a
//! truncated real line, with the AR(1) chain as the worked model.
//!
//! Kernels live on a [`Grid`] as operator matrices. Norms are the weighted
//! sup-norms of `V(x) = (1+|x|)^r` raised to `beta`, see [`WeightSpec`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ar;
pub mod ergodicity;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod perturbation;
pub mod weighted_space;

pub use error::{Error, Result};
pub use kernel::{DiscretizedKernel, DriftCertificate};
pub use weighted_space::{dual_distance, weighted_norm, Grid, SignedDensity, WeightSpec, WeightedFunction};
