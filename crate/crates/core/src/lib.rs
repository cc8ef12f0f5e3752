//! X-ray transform machinery on uniform grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] holds sampled fields, phantoms and geometric masks.
//! * [`xray`] is the discrete parallel-beam transform, its exact transpose
//!   and the normal operator `X*X`.
//! * [`riesz`] implements Riesz potentials, the fractional Laplacian and the
//!   inversion formula for the normal operator.
//! * [`symkernel`] is exact rational algebra on `x_i|x|^-2`, `|x|^-2`,
//!   `|x|^-alpha` and the expansion of `p(x|x|^-2)|x|^-alpha` into kernel
//!   derivatives.
//! * [`abel`] covers angular Fourier series, generalized Abel transforms and
//!   the exact derivative-coefficient tables.
//! * [`recon`] and [`seismo`] run partial-data reconstruction experiments.

pub mod abel;
pub mod error;
pub mod grid;
pub mod io;
pub mod recon;
pub mod riesz;
pub mod seismo;
pub mod symkernel;
pub mod xray;

mod fft;
mod quad;
mod sum;

pub use error::{Error, Result};
pub use grid::{GridField, PhantomSpec, Profile, RegionSpec};
pub use xray::{LineMask, Sinogram, SinogramGeometry};
