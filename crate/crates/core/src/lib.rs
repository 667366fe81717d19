//! Spectral and stochastic machinery for a small Kac system coupled to a
//! finite heat reservoir or to a Maxwellian thermostat.
//!
//! Everything lives in the ground-state representation: a distribution
//! `f = h * Gamma_{M+N}` is stored through the coefficients of `h` over the
//! tensor Hermite basis that is orthonormal for the weight `exp(-pi v^2)`
//! (inverse temperature fixed to `beta = 2*pi`). The crate provides
//!
//! * the one-dimensional Hermite/quadrature kernels ([`hermite`]),
//! * sparse assembly of the collision and thermostat generators ([`operators`]),
//! * exact-in-truncation propagation and steady states ([`propagator`]),
//! * the weighted L2 norm, characteristic functions and a certified
//!   lower-bound search for the GTW `d_2` metric ([`metrics`], [`charfn`], [`d2`]),
//! * an event-driven jump-process simulator ([`dsmc`]),
//! * the `D_N`/`D_1` functional laboratory ([`inequality`]) and the
//!   bound-saturating states ([`saturation`]),
//! * machine-readable experiment reports ([`report`]).

pub mod charfn;
pub mod d2;
pub mod dsmc;
pub mod error;
pub mod hermite;
pub mod inequality;
pub mod metrics;
pub mod operators;
pub mod params;
pub mod propagator;
pub mod report;
pub mod saturation;
pub mod sparse;
pub mod state;
pub mod tensor;

pub use error::{Error, Result};
pub use params::{GeneratorTag, SystemParams};
pub use state::HermiteState;
pub use tensor::TensorBasis;
