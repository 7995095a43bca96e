//! Numerical laboratory for mean-field plane rotators.
//!
//! The crate covers the particle system `dφ_j = -(K/N) Σ_i sin(φ_j - φ_i) dt + dW_j`,
//! its Fokker-Planck limit, the circle `M` of synchronized stationary profiles,
//! weighted `H_{-1}` geometry around `M`, the spectrum of the linearization at a
//! point of `M`, and statistical experiments on the slow diffusion of the
//! synchronization center along `M`.

pub mod bessel;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod hilbert;
pub mod output;
pub mod pde;
pub mod sde;
pub mod spectral;
pub mod stationary;
pub mod stats;

pub use error::{Error, Result};
pub use stationary::{CouplingStrength, StationaryProfile};
