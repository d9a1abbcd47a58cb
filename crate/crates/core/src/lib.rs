//! Simulation and analysis of quantum-correlated twin beams from
//! four-wave mixing, in both the amplifying and the non-amplifying regime.
//!
//! - [`gaussian`]: covariance-matrix states, squeezing, loss and the
//!   intensity-difference noise factor, plus a sampling oracle.
//! - [`channel`]: the vapor cell as a quantum channel, gain-vs-detuning
//!   curves and channel fitting.
//! - [`oam`]: Laguerre-Gaussian beams, fork interferograms and charge
//!   extraction.
//! - [`detection`]: balanced detection, dB conversion and the probe
//!   attenuation optimizer.
//! - [`config`], [`run`], [`output`]: the configuration-driven front end
//!   behind the `twinbeam` binary.

pub mod channel;
pub mod config;
pub mod detection;
pub mod error;
pub mod gaussian;
pub mod oam;
pub mod optim;
pub mod output;
pub mod run;

pub use error::{Error, Result};
