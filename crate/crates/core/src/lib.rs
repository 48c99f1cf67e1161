//! Convolutions of spherical signals computed through generalized Fourier
//! transforms on the sphere S² and the rotation group SO(3).
//!
//! The crate provides special functions ([`harmonics`]), sampling grids and
//! fast transforms ([`gft`]), the rotation operator on signals and spectra
//! ([`rotation`]), S² and SO(3) convolutions ([`conv`]), trainable
//! equivariant layers ([`nn`]), spherical MNIST construction ([`data`]) and
//! equivariance measurement ([`harness`]).

pub mod conv;
pub mod data;
pub mod error;
pub mod gft;
pub mod harmonics;
pub mod harness;
pub mod io;
pub mod nn;
pub mod rotation;

pub use conv::FilterBank;
pub use error::{Error, Result};
pub use gft::{S2Grid, S2Signal, S2Spectrum, SO3Grid, SO3Signal, SO3Spectrum};
pub use harmonics::{Rotation, WignerBlocks};
