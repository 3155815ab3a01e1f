//! Neural-field engine built around trainable sinusoidal activations.
//!
//! The crate provides dense linear algebra, a coordinate-MLP with exact
//! reverse-mode gradients, an Adam training loop for signal-fitting tasks,
//! and the theory-verification machinery that goes with the activation
//! family: moment-matched initialization checks, the Kronecker-product
//! construction of an equivalent plain-sine network, potential-frequency
//! lattice counting, and analytic/empirical neural tangent kernels.
//!
//! Core linear algebra and activation evaluation are generic over the
//! scalar type (`f32`/`f64` via [`scalar::Scalar`]); everything above them
//! is pinned to `f64` through the type aliases exported at the crate root.

pub mod activation;
pub mod eig;
pub mod fastmath;
pub mod io;
pub mod kronecker;
pub mod lattice;
pub mod matrix;
pub mod mlp;
pub mod ntk;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod threads;
pub mod train;

/// Dense row-major `f64` matrix used throughout the engine.
pub type Matrix = matrix::DenseMatrix<f64>;

/// Eigendecomposition result of a symmetric `f64` matrix.
pub type EigenResult = eig::EigenDecomposition<f64>;

/// Activation parameter triple (amplitudes, frequencies, phases) in `f64`.
pub type ActivationParams = activation::ActivationParams<f64>;

pub use activation::{InitConfig, InitScheme, SharingMode};
pub use mlp::{ActivationKind, GradientBundle, Network, NetworkConfig};
pub use rng::Rng;
