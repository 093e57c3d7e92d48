//! Denoising-diffusion sampling with exact and learned scores, together with
//! the Lagrangian turbulence models used to feed and probe it.

pub mod diag;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod io;
pub mod rng;
pub mod scalar;
pub mod score_net;
pub mod sph;
pub mod vgt;

pub use error::{Error, Result};
