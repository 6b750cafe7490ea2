//! Simulation and analysis of polarization-entanglement distribution over a
//! long deployed fibre link.
//!
//! The measurement chain is modelled end to end: an entangled-pair source,
//! a lossy, dispersive and birefringent fibre, single-photon detectors with a
//! time tagger, and the coincidence analysis that turns two time-tag streams
//! into visibilities, fidelity bounds, error rates and key-rate estimates.
//!
//! | module | role |
//! |---|---|
//! | [`quantum_state`] | two-photon density matrices and analyzer projections |
//! | [`pair_source`] | Poisson pair emission |
//! | [`fibre_channel`] | loss, delay, dispersion, birefringence |
//! | [`detection`] | clicks, dark counts, jitter, quantisation |
//! | [`timetag`] | tag streams and file formats |
//! | [`analysis`] | cross-correlation, peak fitting, coincidence counting |
//! | [`metrics`] | visibility, fidelity, QBER, key rates |
//! | [`environment`] | thermal delay drift |
//! | [`harness`] | configuration, end-to-end runs, calibration, reports |

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detection;
pub mod environment;
pub mod error;
pub mod fibre_channel;
pub mod harness;
pub mod metrics;
pub mod pair_source;
pub mod quantum_state;
pub mod rng;
pub mod timetag;
pub mod units;

pub use error::{Error, Result};
