//! Entropy-forecasting flood detection with cooperating immune agents.
//!
//! The detection pipeline runs packet trace → fixed-size observations →
//! per-observation Rényi entropy → additive Holt-Winters forecast →
//! prediction-interval test → k-means source identification. The [`agents`]
//! module wraps detectors as innate (`D_H`) and adaptive (`D_A`) sensors, and
//! [`netsim`] places them on a simulated network to measure detection and
//! mitigation rates.

pub mod agents;
pub mod analyze;
pub mod detector;
pub mod entropy;
pub mod error;
pub mod forecast;
pub mod identify;
pub mod netsim;
pub mod traffic;

pub use error::{Error, Result};
