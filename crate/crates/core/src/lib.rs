//! Simulation and estimation toolkit for sparse OFDM-embedded radar sensing.
//!
//! The crate is organised bottom-up:
//!
//! - [`scene`]: radio/array/target types, steering vectors, resolution and
//!   link-budget formulas, scene validation.
//! - [`waveform`]: chirp generation through the OFDM path, sensing schedules
//!   (frequency-agile, L-shape, comb, conventional) and overhead accounting.
//! - [`clutter`] and [`channel`]: GTRI ground clutter and synthesis of the
//!   post-mixing receiver data for both receive branches.
//! - [`estimator`]: angle-velocity maps, peak extraction, MUSIC refinement,
//!   STAP / STHP range spectra, the frequency-agile baseline and virtual
//!   aperture assembly.
//! - [`harness`]: Monte-Carlo drops, hit rate and normalized RMSE.
//! - [`config`] and [`io`]: configuration files, cube files, CSV and run
//!   manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod clutter;
pub mod config;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod scene;
pub mod seed;
pub mod waveform;

pub use error::{Error, Result};
pub use linalg::C64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
