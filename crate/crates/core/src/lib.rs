//! Models of superconducting single-photon detectors and quantum-emitter
//! photon statistics, with event-driven Monte Carlo oracles for each analytic
//! result.
//!
//! Units throughout: wavelengths in nm, times in ns, currents in uA, rates in
//! counts per second (cps) unless a name says otherwise.

pub mod detector;
pub mod error;
pub mod numeric;
pub mod montecarlo;
pub mod optics;
pub mod oracle;
pub mod photon_stats;

pub use error::{Error, Result};
