use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::irf::{IrfOperator, IrfParams};
use super::scr::detect_scrs;
use super::solver::{deconvolve, SolverParams};
use super::tonic::{estimate_tonic, noise_sd_from_diffs, TonicParams};
use super::EdaDecomposition;
use crate::error::{Error, Result};
use crate::format::g6;
use crate::ingest::{EdaSeries, Gap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeParams {
    pub solver: SolverParams,
    pub tonic: TonicParams,
    /// Gap-free segments shorter than this are skipped.
    pub min_segment_s: f64,
    pub region_eps: f64,
    pub amp_threshold: f64,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            solver: SolverParams::default(),
            tonic: TonicParams::default(),
            min_segment_s: 60.0,
            region_eps: 0.001,
            amp_threshold: 0.02,
        }
    }
}

struct SegmentResult {
    tonic: Vec<f64>,
    driver: Vec<f64>,
    phasic: Vec<f64>,
}

pub fn decompose(series: &EdaSeries, irf: IrfParams, params: &DecomposeParams) -> Result<EdaDecomposition> {
    let rate = series.nominal_rate_hz;
    let op = IrfOperator::new(irf, rate)?;
    let min_len = (params.min_segment_s * rate).ceil() as usize;

    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for seg in series.segments() {
        if seg.len() < min_len.max(2) {
            let gap = Gap {
                start: series.samples[seg.start].t,
                end: series.samples[seg.end - 1].t,
            };
            log::warn!(
                "{}: EDA segment {}..{} shorter than {} s, skipped",
                series.participant_id,
                gap.start,
                gap.end,
                params.min_segment_s
            );
            skipped.push(gap);
        } else {
            kept.push(seg);
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{}: no EDA segment of at least {} s",
            series.participant_id, params.min_segment_s
        )));
    }

    let values = series.values();
    let results: Vec<SegmentResult> = kept
        .par_iter()
        .map(|seg| decompose_segment(&op, &values[seg.clone()], params))
        .collect::<Result<_>>()?;

    let total: usize = kept.iter().map(|s| s.len()).sum();
    let mut out = EdaDecomposition {
        participant_id: series.participant_id.clone(),
        rate_hz: rate,
        irf,
        lambda: params.solver.lambda,
        t: Vec::with_capacity(total),
        raw: Vec::with_capacity(total),
        tonic: Vec::with_capacity(total),
        driver: Vec::with_capacity(total),
        phasic: Vec::with_capacity(total),
        segments: Vec::with_capacity(kept.len()),
        skipped,
        residual_rms: 0.0,
        noise_sd: 0.0,
        events: Vec::new(),
    };
    let mut diffs = Vec::with_capacity(total);
    for (seg, res) in kept.iter().zip(results) {
        let start = out.t.len();
        out.t.extend(series.samples[seg.clone()].iter().map(|s| s.t));
        out.raw.extend_from_slice(&values[seg.clone()]);
        out.tonic.extend(res.tonic);
        out.driver.extend(res.driver);
        out.phasic.extend(res.phasic);
        out.segments.push(start..out.t.len());
        diffs.extend(values[seg.clone()].windows(2).map(|w| w[1] - w[0]));
    }
    let ss: f64 = (0..out.len()).map(|i| out.residual(i).powi(2)).sum();
    out.residual_rms = (ss / out.len() as f64).sqrt();
    out.noise_sd = noise_sd_from_diffs(diffs);
    out.events = detect_scrs(&out, params.region_eps, params.amp_threshold);
    Ok(out)
}

fn decompose_segment(op: &IrfOperator, y: &[f64], params: &DecomposeParams) -> Result<SegmentResult> {
    let n = y.len();
    let tonic = estimate_tonic(y, op.rate_hz, &params.tonic);
    let target: Vec<f64> = y.iter().zip(&tonic).map(|(a, b)| a - b).collect();
    let driver = deconvolve(op, &target, &params.solver)?.driver;

    let mut phasic = vec![0.0; n];
    op.forward(&driver, &mut phasic);
    Ok(SegmentResult { tonic, driver, phasic })
}

/// `t_utc_ms,tonic,driver,phasic_sc`
pub fn write_decomposition_csv<W: Write>(d: &EdaDecomposition, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_utc_ms,tonic,driver,phasic_sc")?;
    for i in 0..d.len() {
        writeln!(
            out,
            "{},{},{},{}",
            d.t[i].0,
            g6(d.tonic[i]),
            g6(d.driver[i]),
            g6(d.phasic[i])
        )?;
    }
    Ok(())
}
