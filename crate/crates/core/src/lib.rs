//! SO(3)-equivariant spherical convolutional networks.
//!
//! Signals live on an equiangular `2b × 2b` grid. Convolution with zonal
//! filters is a per-degree product of spherical harmonic coefficients, so
//! every layer commutes exactly with rotations of bandlimited inputs.
//!
//! ```
//! use sphconv::sft::{forward, inverse};
//! use sphconv::synth::random_bandlimited_signal;
//! use sphconv::Bandwidth;
//!
//! let b = Bandwidth::new(16)?;
//! let f = random_bandlimited_signal(b, 1, 7);
//! let g = inverse(&forward(&f))?;
//! assert!(g.max_abs_diff(&f) < 1e-10);
//! # Ok::<(), sphconv::Error>(())
//! ```
//!
//! The `examples/` directory has one runnable program per capability, from
//! `transform_roundtrip` through `train_toy_classifier` and `shape_alignment`.

pub mod align;
pub mod bench;
pub mod cli;
pub mod equivariance;
pub mod error;
pub mod grid;
pub mod harmonics;
pub mod io;
pub mod mesh;
pub mod network;
pub mod rotation;
pub mod sft;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Bandwidth, SphericalGrid};
pub use harmonics::HarmonicTable;
pub use rotation::RotationZYZ;
pub use sft::{SftMethod, SpectralCoeffs, SphericalSignal};
