//! Simulation of sigma-delta DACs whose high-rate output is multiplexed in
//! the analog domain by `M` low-rate DACs.
//!
//! The pipeline runs [`modulator`] (or its time-interleaved form in
//! [`interleave`]) to produce the code stream, [`dacbank`] to schedule and
//! render the DAC elements, [`pulseshape`] for non-ideal pulse edges and
//! [`analysis`] for spectra and SNDR. [`harness`] ties these together into
//! scenario runs.

pub mod analysis;
pub mod dacbank;
pub mod error;
pub mod harness;
pub mod interleave;
pub mod modulator;
pub mod pulseshape;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
