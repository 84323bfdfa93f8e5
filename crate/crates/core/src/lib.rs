//! Simulation and reception of an underwater acoustic BPSK/QPSK link.
//!
//! The transmit side ([`waveforms`]) builds PSK payloads behind a pair of
//! hyperbolic FM pilots. [`channel`] pushes them through a random multipath,
//! per-path Doppler and AWGN channel. The receive side ([`receiver`]) finds the
//! pilots, estimates the Doppler scale, and demodulates each symbol either with
//! a coherent matched filter or with a pair of deep belief networks: one that
//! de-noises a pixelized picture of the symbol ([`pixelizer`], [`dbn`]) and one
//! that classifies the reconstruction. [`rbm`] holds the energy-model core and
//! its exact small-model oracles, and [`harness`] drives datasets, training and
//! Monte-Carlo BER sweeps.

pub mod channel;
pub mod dbn;
pub mod dsp;
mod error;
pub mod harness;
pub mod io;
pub mod pixelizer;
pub mod rbm;
pub mod receiver;
pub mod rng;
pub mod waveforms;

pub use error::{Error, Result};
