//! Hyperbolic kernel convolution in the Lorentz model.
//!
//! The crate is organized bottom-up:
//!
//! - [`manifold`]: Lorentz-model geometry (distance, exp/log maps, parallel
//!   transport, translations, embedding, wrapped-normal sampling).
//! - [`kernelgen`]: placement of kernel points by Riemannian gradient descent.
//! - [`layers`]: hyperbolic linear layer, centroid, distance head and the
//!   kernel convolution itself.
//! - [`autograd`]: reverse-mode differentiation and optimizers.
//! - [`graphnet`]: datasets, network assembly, training and evaluation.
//! - [`invariants`]: randomized property suites shared by tests and the CLI.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what every public entry point uses.

// `!(x <= tol)` style comparisons are how NaN is rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod error;
pub mod graphnet;
pub mod invariants;
pub mod kernelgen;
pub mod layers;
pub mod manifold;
pub mod rng;
pub mod scalar;
pub mod serde_f64;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = manifold::LorentzPoint<f64>;
pub type Tangent = manifold::TangentVector<f64>;
