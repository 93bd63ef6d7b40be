use serde::{Deserialize, Serialize};

use super::irf::IrfOperator;
use super::EdaDecomposition;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrEvent {
    pub onset: Timestamp,
    pub peak: Timestamp,
    /// Peak of the region's own conductance response, µS.
    pub amplitude_us: f64,
    /// Integral of the region's driver, µS.
    pub area_us: f64,
    pub significant: bool,
}

/// Candidate events are maximal runs with driver > `region_eps`. Each run is
/// convolved on its own (over the run plus the response tail, within its
/// segment) and the maximum of that response is the amplitude.
pub fn detect_scrs(decomp: &EdaDecomposition, region_eps: f64, amp_threshold: f64) -> Vec<ScrEvent> {
    let Ok(op) = IrfOperator::new(decomp.irf, decomp.rate_hz) else {
        return Vec::new();
    };
    let tail = op.support_len(1e-6);
    let dt = 1.0 / decomp.rate_hz;
    let mut events = Vec::new();
    let mut response = Vec::new();
    for seg in &decomp.segments {
        let d = &decomp.driver[seg.clone()];
        let mut i = 0;
        while i < d.len() {
            if d[i] <= region_eps {
                i += 1;
                continue;
            }
            let start = i;
            while i < d.len() && d[i] > region_eps {
                i += 1;
            }
            let end = (i + tail).min(d.len());
            let mut isolated = vec![0.0; end - start];
            isolated[..i - start].copy_from_slice(&d[start..i]);
            response.resize(end - start, 0.0);
            op.forward(&isolated, &mut response);
            let (k, amp) = response
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            if !(amp > 0.0) {
                continue;
            }
            events.push(ScrEvent {
                onset: decomp.t[seg.start + start],
                peak: decomp.t[seg.start + start + k],
                amplitude_us: amp,
                area_us: d[start..i].iter().sum::<f64>() * dt,
                significant: amp >= amp_threshold,
            });
        }
    }
    events
}
