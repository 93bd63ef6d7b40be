use std::io::Write;

use serde::{Deserialize, Serialize};

use super::EdaDecomposition;
use crate::error::{Error, Result};
use crate::format::g6;
use crate::time::{ceil_to_grid, floor_to_grid, secs_to_ms, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub window_s: f64,
    pub step_s: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            window_s: 300.0,
            step_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdaWindowFeatures {
    /// Window end; the window is (t − window, t].
    pub t: Timestamp,
    pub sd_phasic_driver: f64,
    pub iscr_us_s: f64,
    pub n_scr: usize,
    pub scr_freq_per_min: f64,
    pub max_scr_amp_us: f64,
    pub sum_scr_amp_us: f64,
    pub mean_scl_us: f64,
}

/// Running sum and sum of squares of `x − anchor` over a sliding index
/// range, re-summed once the range has turned over.
struct Moments<'a> {
    x: &'a [f64],
    anchor: f64,
    sum: f64,
    sumsq: f64,
    removed: usize,
}

impl<'a> Moments<'a> {
    fn new(x: &'a [f64]) -> Self {
        Moments {
            x,
            anchor: x.first().copied().unwrap_or(0.0),
            sum: 0.0,
            sumsq: 0.0,
            removed: 0,
        }
    }

    fn push(&mut self, i: usize) {
        let v = self.x[i] - self.anchor;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn pop(&mut self, i: usize) {
        let v = self.x[i] - self.anchor;
        self.sum -= v;
        self.sumsq -= v * v;
        self.removed += 1;
    }

    fn maybe_resum(&mut self, lo: usize, hi: usize) {
        if self.removed > 0 && self.removed >= hi - lo && hi > lo {
            self.anchor = self.x[lo];
            self.sum = 0.0;
            self.sumsq = 0.0;
            for i in lo..hi {
                self.push(i);
            }
            self.removed = 0;
        }
    }

    fn mean(&self, n: usize) -> f64 {
        self.anchor + self.sum / n as f64
    }

    fn sample_sd(&self, n: usize) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let var = (self.sumsq - self.sum * self.sum / n as f64) / (n - 1) as f64;
        var.max(0.0).sqrt()
    }
}

/// Right-anchored rolling features on an epoch-aligned grid of window ends.
///
/// A window is emitted only when it lies entirely inside one processed
/// segment, so no feature ever spans a gap. The driver integral is the
/// trapezoid integral of the linearly interpolated driver over the closed
/// window; the other sample statistics use the samples in (t − window, t].
pub fn window_features(decomp: &EdaDecomposition, params: &FeatureParams) -> Result<Vec<EdaWindowFeatures>> {
    let window_ms = secs_to_ms(params.window_s)
        .ok_or_else(|| Error::Parameter(format!("window_s {} must be positive", params.window_s)))?;
    let step_ms = secs_to_ms(params.step_s)
        .ok_or_else(|| Error::Parameter(format!("step_s {} must be positive", params.step_s)))?;

    let mut events: Vec<(Timestamp, f64)> = decomp
        .significant_events()
        .map(|e| (e.peak, e.amplitude_us))
        .collect();
    events.sort_by_key(|e| e.0);

    let mut out = Vec::new();
    for seg in &decomp.segments {
        let t = &decomp.t[seg.clone()];
        let driver = &decomp.driver[seg.clone()];
        let tonic = &decomp.tonic[seg.clone()];
        let (first, last) = (t[0].0, t[t.len() - 1].0);
        if last - first < window_ms {
            continue;
        }
        let cum = cumulative_trapezoid(t, driver);
        let mut dm = Moments::new(driver);
        let mut tm = Moments::new(tonic);
        let (mut lo, mut hi) = (0usize, 0usize);
        let (mut elo, mut ehi) = (0usize, 0usize);

        let mut end = ceil_to_grid(first + window_ms, step_ms);
        let stop = floor_to_grid(last, step_ms);
        while end <= stop {
            let start = end - window_ms;
            while hi < t.len() && t[hi].0 <= end {
                dm.push(hi);
                tm.push(hi);
                hi += 1;
            }
            while lo < hi && t[lo].0 <= start {
                dm.pop(lo);
                tm.pop(lo);
                lo += 1;
            }
            dm.maybe_resum(lo, hi);
            tm.maybe_resum(lo, hi);
            while ehi < events.len() && events[ehi].0 .0 <= end {
                ehi += 1;
            }
            while elo < ehi && events[elo].0 .0 <= start {
                elo += 1;
            }

            let n = hi - lo;
            if n > 0 {
                let in_window = &events[elo..ehi];
                let n_scr = in_window.len();
                out.push(EdaWindowFeatures {
                    t: Timestamp(end),
                    sd_phasic_driver: dm.sample_sd(n),
                    iscr_us_s: integral_at(t, driver, &cum, end) - integral_at(t, driver, &cum, start),
                    n_scr,
                    scr_freq_per_min: n_scr as f64 / (params.window_s / 60.0),
                    max_scr_amp_us: in_window.iter().map(|e| e.1).fold(0.0, f64::max),
                    sum_scr_amp_us: in_window.iter().map(|e| e.1).sum(),
                    mean_scl_us: tm.mean(n),
                });
            }
            end += step_ms;
        }
    }
    Ok(out)
}

/// `cum[i]` = trapezoid integral of the driver from t[0] to t[i], seconds.
fn cumulative_trapezoid(t: &[Timestamp], x: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] + x[i - 1]) * (t[i].0 - t[i - 1].0) as f64 / 1000.0;
        cum.push(acc);
    }
    cum
}

/// Integral from t[0] to `at` (which must lie within the sample span).
fn integral_at(t: &[Timestamp], x: &[f64], cum: &[f64], at: i64) -> f64 {
    let j = t.partition_point(|s| s.0 <= at) - 1;
    if t[j].0 == at || j + 1 == t.len() {
        return cum[j];
    }
    let span = (t[j + 1].0 - t[j].0) as f64;
    let frac = (at - t[j].0) as f64 / span;
    let x_at = x[j] + (x[j + 1] - x[j]) * frac;
    cum[j] + 0.5 * (x[j] + x_at) * (at - t[j].0) as f64 / 1000.0
}

/// `t_utc_ms,sd_phasic,iscr,n_scr,scr_freq_per_min,max_amp,sum_amp,mean_scl`
pub fn write_features_csv<W: Write>(features: &[EdaWindowFeatures], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_utc_ms,sd_phasic,iscr,n_scr,scr_freq_per_min,max_amp,sum_amp,mean_scl")?;
    for f in features {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.t.0,
            g6(f.sd_phasic_driver),
            g6(f.iscr_us_s),
            f.n_scr,
            g6(f.scr_freq_per_min),
            g6(f.max_scr_amp_us),
            g6(f.sum_scr_amp_us),
            g6(f.mean_scl_us)
        )?;
    }
    Ok(())
}

/// Driver integral over the closed interval [a, b] of one segment, with the
/// same interpolation rule as the windowed ISCR.
pub fn driver_integral(decomp: &EdaDecomposition, segment: usize, a: Timestamp, b: Timestamp) -> f64 {
    let seg = decomp.segments[segment].clone();
    let t = &decomp.t[seg.clone()];
    let x = &decomp.driver[seg];
    let cum = cumulative_trapezoid(t, x);
    let clamp = |v: i64| v.clamp(t[0].0, t[t.len() - 1].0);
    integral_at(t, x, &cum, clamp(b.0)) - integral_at(t, x, &cum, clamp(a.0))
}
