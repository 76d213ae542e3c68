//! Event-driven Monte Carlo of emitters, detectors and correlation
//! electronics. Serves as an independent check of the analytic models.
//!
//! All randomness flows from a `(seed, label)` pair, so identical inputs give
//! bit-identical outputs on any platform and thread count.

pub mod detector;
pub mod hbt;
pub mod rng;
pub mod sources;
pub mod stream;
pub mod tcspc;
pub mod trace;

pub use detector::{
    run_detector, simulate_detector, simulate_poisson_detector, DetectorRun, RunStats, SimOptions,
};
pub use hbt::{autocorrelate, hbt_correlate, split_beamsplitter, CorrelationHistogram, CorrelationMode};
pub use sources::{
    simulate_emitter, simulate_poisson, simulate_pulsed_emitter, EmitterSource, PhotonSource, PoissonSource,
    PulsedEmitterParams, PulsedEmitterSource, StreamSource,
};
pub use stream::TimestampStream;
pub use tcspc::{fit_tail_lifetime, tcspc_histogram, DecayHistogram, LifetimeFit};
pub use trace::{effective_current_fit, CurrentTrace, ExpFit};
