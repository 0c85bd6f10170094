//! Recovery of rank-two signals from noisy order-3 tensors by parameterized
//! orthogonalized deflation, together with the random-matrix asymptotics that
//! predict (and improve) its behavior.
//!
//! The crate is organized around the deflation workflow:
//!
//! - [`tensor`]: dense cubic tensors, contractions, spiked-model generation;
//! - [`rank_one`]: best rank-one approximation by tensor power iteration;
//! - [`spectral`]: block contraction matrices, their spectra and empirical
//!   Stieltjes transforms;
//! - [`stieltjes`]: the limiting laws (semicircle and its deformation), their
//!   densities and support edges;
//! - [`asymptotics`]: deterministic equation systems for both deflation steps;
//! - [`estimation`]: recovering hidden model parameters from observables;
//! - [`pipeline`]: end-to-end deflation runs and the improved deflation that
//!   tunes the projection strength.

pub mod asymptotics;
pub mod error;
pub mod estimation;
pub mod mat;
pub mod pipeline;
pub mod rank_one;
pub mod rng;
pub mod spectral;
pub mod stieltjes;
pub mod tensor;

pub use error::{Error, Result};
