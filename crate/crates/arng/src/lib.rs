//! Simulator and analysis stack for an astronomical random number
//! generator: a two-color photon time-tagger fed by high-redshift sources,
//! with validity accounting, bit extraction, predictability analysis,
//! magnitude calibration, and a quantum-eraser consumer.

pub mod bits;
pub mod calibration;
pub mod eraser;
pub mod error;
pub mod mi;
pub mod par;
pub mod spectral;
pub mod stream;
pub mod table;
pub mod tagfile;
pub mod validity;

pub use error::{ArngError, Result};
