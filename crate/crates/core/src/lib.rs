//! Vibration focusing on a thin plate driven by five point actuators.
//!
//! The crate models a simply supported Kirchhoff plate analytically, builds
//! per-actuator response fields, superposes them into RMS energy images, and
//! searches actuator gain spectra whose energy image matches a single-point
//! target under SSIM. Results can be tabulated per target point and streamed
//! to a (virtual) drive board over UDP.

pub mod anneal;
pub mod cli;
pub mod config;
pub mod drive;
pub mod error;
pub mod export;
pub mod lut;
pub mod pattern;
pub mod plate;
pub mod ssim;
pub mod trig;

pub use error::{Error, Result};
