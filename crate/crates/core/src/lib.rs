//! Multimodal pedestrian well-being pipeline.
//!
//! Ingests inter-beat intervals, skin conductance, GPS fixes, experience
//! sampling responses and walkability cells; derives rolling RMSSD, a
//! tonic/phasic EDA decomposition with SCR events, walking segments and
//! per-day arousal episodes; and writes aligned, analysis-ready outputs.

pub mod config;
pub mod eda;
pub mod error;
pub mod esm;
pub mod format;
pub mod fuse;
pub mod geo;
pub mod hrv;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
pub use time::{Timestamp, TzOffset};
