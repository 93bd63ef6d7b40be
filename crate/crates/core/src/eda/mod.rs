//! Electrodermal activity: tonic/phasic decomposition by nonnegative
//! deconvolution with a Bateman impulse response, SCR detection and
//! windowed features.

mod decompose;
mod features;
pub mod irf;
mod optimize;
mod scr;
pub mod solver;
pub mod tonic;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::Gap;
use crate::time::Timestamp;

pub use decompose::{decompose, write_decomposition_csv, DecomposeParams};
pub use features::{driver_integral, window_features, write_features_csv, EdaWindowFeatures, FeatureParams};
pub use irf::{bateman_irf, IrfOperator, IrfParams};
pub use optimize::{irf_objective, optimize_irf, Compactness, IrfFit, SearchBox};
pub use scr::{detect_scrs, ScrEvent};
pub use solver::SolverParams;
pub use tonic::TonicParams;

/// Decomposed conductance. Sample vectors cover the processed gap-free
/// segments only, concatenated; `segments` indexes into them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaDecomposition {
    pub participant_id: String,
    pub rate_hz: f64,
    pub irf: IrfParams,
    pub lambda: f64,
    pub t: Vec<Timestamp>,
    pub raw: Vec<f64>,
    pub tonic: Vec<f64>,
    /// µS/s, nonnegative.
    pub driver: Vec<f64>,
    /// Driver convolved with the impulse response, µS.
    pub phasic: Vec<f64>,
    pub segments: Vec<Range<usize>>,
    /// Gap-free stretches too short to decompose.
    pub skipped: Vec<Gap>,
    pub residual_rms: f64,
    pub noise_sd: f64,
    pub events: Vec<ScrEvent>,
}

impl EdaDecomposition {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn residual(&self, i: usize) -> f64 {
        self.raw[i] - self.tonic[i] - self.phasic[i]
    }

    pub fn significant_events(&self) -> impl Iterator<Item = &ScrEvent> {
        self.events.iter().filter(|e| e.significant)
    }
}
