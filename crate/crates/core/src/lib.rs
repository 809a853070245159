//! Scoring toolkit for event-detection systems evaluated against reference
//! annotations on a shared timeline.
//!
//! Six metrics are provided: ATWV, DPALIGN, EPOCH, OVLP, TAES and IRA
//! (Cohen's kappa over EPOCH counts). Each scorer takes a normalized
//! reference/hypothesis pair and produces [`counts::ConfusionCounts`], from
//! which [`counts::derive`] computes sensitivity, specificity, FA/24h and
//! the rest. [`curves`] sweeps confidence thresholds into DET curves and
//! [`stats`] compares per-patient score vectors across metrics and systems.

pub mod annot;
pub mod atwv;
pub mod cli;
pub mod counts;
pub mod curves;
pub mod dpalign;
pub mod epoch;
pub mod error;
pub mod ovlp;
pub mod scoring;
pub mod stats;
pub mod taes;

pub use error::{Error, Result};
