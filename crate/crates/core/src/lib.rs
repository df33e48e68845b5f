//! Link-level simulation of high-rate UWB receivers.
//!
//! The crate generates Saleh-Valenzuela multipath channels (IEEE 802.15.3a
//! CM3/CM4 parameter sets), forms the composite pulse/channel/matched-filter
//! response, and evaluates four receivers over it:
//!
//! - selective Rake with maximal-ratio combining,
//! - a single-finger front-end followed by an MMSE linear equalizer,
//! - Rake followed by an MMSE linear equalizer (Rake-MMSE-LE),
//! - Rake followed by an MMSE decision-feedback equalizer (Rake-MMSE-DFE).
//!
//! Error rates come from three independent routes: a Chernoff bound on the
//! residual MSE, an exact Fourier-series expression for BPSK with ISI and
//! Gaussian noise, and seeded Monte Carlo simulation of whole packets.
//!
//! All times are in nanoseconds. The symbol-spaced model and the
//! waveform-level model share one sign convention: `alpha[k]` multiplies
//! `d(n - k)`, so positive lags are post-cursors.

pub mod ber;
pub mod channel;
pub mod cli;
pub mod equalizer;
pub mod error;
pub mod pulse;
pub mod rng;
pub mod txrx;

pub use error::{Error, Result};
