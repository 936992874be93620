//! Spin-rotation spectra, ensemble magnetization dynamics, pickup-coil
//! induction and waveform analysis for optically centrifuged paramagnetic
//! oxygen.

pub mod angular;
pub mod config;
pub mod coil;
pub mod commands;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod quadrature;
pub mod reproduce;
pub mod spectrum;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
