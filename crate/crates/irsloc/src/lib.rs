//! IRS-aided cooperative localization toolkit.
//!
//! The crate models a fleet of roadside base stations measuring ranges to
//! vehicle-mounted reflecting surfaces, and provides:
//!
//! - geometry and beam-span computation per BS/target link ([`geometry`]),
//! - the subarray beam-flattening channel budget ([`channel`]),
//! - Fisher-information / CRLB evaluation in matrix and closed form ([`crlb`]),
//! - a Polyblock monotonic-optimization solver for dwell-time allocation
//!   over the probability simplex ([`polyblock`]),
//! - interference-aware BS/target association scheduling ([`association`]),
//! - a Monte Carlo MLE harness that verifies CRLB tightness ([`estimator`]),
//! - scenario ingestion and experiment orchestration ([`cli`]).

pub mod association;
pub mod channel;
pub mod cli;
pub mod crlb;
pub mod estimator;
pub mod geometry;
pub mod polyblock;
