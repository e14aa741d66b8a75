//! Spherical-harmonics (SH) domain processing for microphone arrays that move
//! through a sound field.
//!
//! The crate covers the full estimation chain:
//!
//! * [`sh`]: SH indexing, spherical harmonics, spherical Bessel functions,
//!   Wigner 3j/d/D symbols.
//! * [`motion`]: rotation, translation and composed motion operators acting on
//!   SH coefficient vectors.
//! * [`steering`]: array geometries and rigid-sphere steering matrices.
//! * [`spectral`]: multichannel STFT and frame phase alignment.
//! * [`pwd`]: plane-wave decomposition (PWD) estimators: stationary, motion
//!   compensated and motion-enhanced (frame stacking).
//! * [`music`]: covariance, frequency smoothing, SH-MUSIC, peak picking,
//!   effective rank and error metrics.
//! * [`sim`]: moving rigid-sphere array simulator.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. With `std` the STFT runs on `rustfft`; without it a direct DFT is
//! used.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod motion;
pub mod music;
pub mod pwd;
pub mod sh;
pub mod sim;
pub mod spectral;
pub mod steering;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Wavenumber `2πf/c` for a frequency in Hz.
pub fn wavenumber(freq_hz: f64, speed_of_sound: f64) -> f64 {
    2.0 * core::f64::consts::PI * freq_hz / speed_of_sound
}
