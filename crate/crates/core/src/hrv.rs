//! Heart rate variability: rolling RMSSD, sleep-period baselines,
//! standardisation and distribution summaries.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g6;
use crate::ingest::IbiSeries;
use crate::stats::{self, Bandwidth, FiveNumber, KdeCurve, SdKind};
use crate::time::{ceil_to_grid, secs_to_ms, Timestamp, TzOffset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmssdParams {
    pub window_s: f64,
    pub step_s: f64,
    /// Windows with fewer successive-difference pairs emit nothing.
    pub min_intervals: usize,
}

impl Default for RmssdParams {
    fn default() -> Self {
        RmssdParams {
            window_s: 300.0,
            step_s: 1.0,
            min_intervals: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmssdPoint {
    /// Window end; the point summarises (t − window, t].
    pub t: Timestamp,
    pub rmssd_ms: f64,
    /// Number of successive differences (N − 1) in the window.
    pub n_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmssdSeries {
    pub participant_id: String,
    pub points: Vec<RmssdPoint>,
    pub window_s: f64,
    pub step_s: f64,
}

impl RmssdSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rmssd_ms).collect()
    }
}

/// Rolling RMSSD on an epoch-aligned grid of window ends.
///
/// A successive pair (IBI_i, IBI_{i+1}) contributes to a window iff both beat
/// timestamps fall inside it. Runs in O(beats + emitted points): the window's
/// pairs form a contiguous index range whose sum of squared differences is
/// updated incrementally and re-summed whenever the range has fully turned
/// over, which bounds rounding drift to one window's worth of updates.
pub fn rolling_rmssd(series: &IbiSeries, params: &RmssdParams) -> Result<RmssdSeries> {
    let window_ms = secs_to_ms(params.window_s)
        .ok_or_else(|| Error::Parameter(format!("window_s {} must be positive", params.window_s)))?;
    let step_ms = secs_to_ms(params.step_s)
        .ok_or_else(|| Error::Parameter(format!("step_s {} must be positive", params.step_s)))?;
    let mut out = RmssdSeries {
        participant_id: series.participant_id.clone(),
        points: Vec::new(),
        window_s: params.window_s,
        step_s: params.step_s,
    };
    let beats = &series.samples;
    if beats.len() < 2 {
        return Ok(out);
    }

    let sq: Vec<f64> = beats
        .windows(2)
        .map(|w| {
            let d = w[1].ibi_ms - w[0].ibi_ms;
            d * d
        })
        .collect();
    let n_pairs = sq.len();
    let first_t = beats[0].t.0;
    let last_t = beats[beats.len() - 1].t.0;

    let (mut lo, mut hi) = (0usize, 0usize);
    let mut sum = 0.0f64;
    let mut nonzero = 0usize;
    let mut removed_since_resum = 0usize;

    let mut t = ceil_to_grid(first_t, step_ms);
    let t_end = ceil_to_grid(last_t, step_ms);
    while t <= t_end {
        while hi < n_pairs && beats[hi + 1].t.0 <= t {
            sum += sq[hi];
            nonzero += usize::from(sq[hi] > 0.0);
            hi += 1;
        }
        while lo < hi && beats[lo].t.0 <= t - window_ms {
            sum -= sq[lo];
            nonzero -= usize::from(sq[lo] > 0.0);
            lo += 1;
            removed_since_resum += 1;
        }
        if removed_since_resum > 0 && removed_since_resum >= hi - lo {
            sum = sq[lo..hi].iter().sum();
            removed_since_resum = 0;
        }

        let count = hi - lo;
        if count >= params.min_intervals.max(1) {
            let s = if nonzero == 0 { 0.0 } else { sum.max(0.0) };
            out.points.push(RmssdPoint {
                t: Timestamp(t),
                rmssd_ms: (s / count as f64).sqrt(),
                n_intervals: count,
            });
        }

        // Jump over stretches with no pair to add and an empty window.
        if count == 0 && hi < n_pairs {
            let next = ceil_to_grid(beats[hi + 1].t.0, step_ms);
            t = next.max(t + step_ms);
        } else {
            t += step_ms;
        }
    }
    Ok(out)
}

/// Nightly clock window in local time; may cross midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl Default for SleepWindow {
    fn default() -> Self {
        SleepWindow {
            start: NaiveTime::from_hms_opt(1, 0, 0).unwrap(),
            end: NaiveTime::from_hms_opt(6, 0, 0).unwrap(),
        }
    }
}

impl SleepWindow {
    /// The local date that identifies the night containing `t` (the date on
    /// which the window ends), or `None` when `t` is outside the window.
    pub fn night_of(&self, t: Timestamp, tz: TzOffset) -> Option<NaiveDate> {
        let local = tz.local(t);
        let tod = local.time();
        let date = local.date_naive();
        if self.start <= self.end {
            (tod >= self.start && tod < self.end).then_some(date)
        } else if tod >= self.start {
            date.succ_opt()
        } else if tod < self.end {
            Some(date)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBaseline {
    pub date: NaiveDate,
    pub rmssd_ms: f64,
    /// Sum of in-window inter-beat intervals, seconds.
    pub coverage_s: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub participant_id: String,
    pub sleep_window: SleepWindow,
    pub days: Vec<DailyBaseline>,
}

impl BaselineSummary {
    pub fn values(&self) -> Vec<f64> {
        self.days.iter().map(|d| d.rmssd_ms).collect()
    }
}

pub const DEFAULT_MIN_SLEEP_COVERAGE_S: f64 = 1800.0;

/// Per-night median of rolling RMSSD restricted to the sleep window.
pub fn sleep_baseline(
    ibi: &IbiSeries,
    params: &RmssdParams,
    window: SleepWindow,
    tz: TzOffset,
) -> Result<BaselineSummary> {
    let rmssd = rolling_rmssd(ibi, params)?;
    Ok(sleep_baseline_from(ibi, &rmssd, window, tz, DEFAULT_MIN_SLEEP_COVERAGE_S))
}

/// As [`sleep_baseline`], reusing an already computed rolling series. Nights
/// with less than `min_coverage_s` of in-window beats get no baseline.
pub fn sleep_baseline_from(
    ibi: &IbiSeries,
    rmssd: &RmssdSeries,
    window: SleepWindow,
    tz: TzOffset,
    min_coverage_s: f64,
) -> BaselineSummary {
    let mut coverage: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for s in &ibi.samples {
        if let Some(night) = window.night_of(s.t, tz) {
            *coverage.entry(night).or_default() += s.ibi_ms / 1000.0;
        }
    }
    let mut values: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for p in &rmssd.points {
        if let Some(night) = window.night_of(p.t, tz) {
            values.entry(night).or_default().push(p.rmssd_ms);
        }
    }
    let days = values
        .into_iter()
        .filter_map(|(date, vals)| {
            let cov = coverage.get(&date).copied().unwrap_or(0.0);
            if cov < min_coverage_s || vals.is_empty() {
                return None;
            }
            let median = stats::percentile(&vals, 50.0).ok()?;
            Some(DailyBaseline {
                date,
                rmssd_ms: median,
                coverage_s: cov,
                n_points: vals.len(),
            })
        })
        .collect();
    BaselineSummary {
        participant_id: ibi.participant_id.clone(),
        sleep_window: window,
        days,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeScope {
    #[default]
    PerParticipantAll,
    PerParticipantWalking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZPoint {
    pub t: Timestamp,
    pub rmssd_ms: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSeries {
    pub participant_id: String,
    pub scope: StandardizeScope,
    pub mean: f64,
    pub sd: f64,
    /// Set when the scoped values had zero variance; every z is then 0.
    pub degenerate: bool,
    pub points: Vec<ZPoint>,
}

impl StandardizedSeries {
    /// z at exactly `t`, if that point is in scope.
    pub fn z_at(&self, t: Timestamp) -> Option<f64> {
        self.points
            .binary_search_by_key(&t, |p| p.t)
            .ok()
            .map(|i| self.points[i].z)
    }
}

/// z-scores of the RMSSD points in scope. With the walking scope only points
/// inside one of the closed `walking` intervals take part (and are returned).
pub fn standardize(
    series: &RmssdSeries,
    scope: StandardizeScope,
    walking: &[(Timestamp, Timestamp)],
    sd_kind: SdKind,
) -> Result<StandardizedSeries> {
    let in_scope: Vec<&RmssdPoint> = match scope {
        StandardizeScope::PerParticipantAll => series.points.iter().collect(),
        StandardizeScope::PerParticipantWalking => {
            let mut iv = walking.to_vec();
            iv.sort();
            series
                .points
                .iter()
                .filter(|p| {
                    let i = iv.partition_point(|(s, _)| *s <= p.t);
                    i > 0 && p.t <= iv[i - 1].1
                })
                .collect()
        }
    };
    if in_scope.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no RMSSD points in scope {scope:?} for {}",
            series.participant_id
        )));
    }
    let values: Vec<f64> = in_scope.iter().map(|p| p.rmssd_ms).collect();
    let mean = stats::mean(&values).unwrap_or(0.0);
    let sd = stats::std_dev(&values, sd_kind).unwrap_or(0.0);
    let degenerate = !(sd > 0.0);
    if degenerate {
        log::warn!(
            "{}: zero RMSSD variance in scope {scope:?}; z-scores set to 0",
            series.participant_id
        );
    }
    let points = in_scope
        .iter()
        .map(|p| ZPoint {
            t: p.t,
            rmssd_ms: p.rmssd_ms,
            z: if degenerate { 0.0 } else { (p.rmssd_ms - mean) / sd },
        })
        .collect();
    Ok(StandardizedSeries {
        participant_id: series.participant_id.clone(),
        scope,
        mean,
        sd,
        degenerate,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub five_number: FiveNumber,
    pub kde: Option<KdeCurve>,
    /// Why the KDE was not produced, when it was not.
    pub kde_refused: Option<String>,
}

/// Boxplot statistics plus a Gaussian KDE on a 256-point grid.
pub fn summarize_distribution(values: &[f64], bandwidth: Bandwidth) -> Result<DistributionSummary> {
    let five_number = FiveNumber::from_values(values)?;
    let (kde, kde_refused) = match stats::gaussian_kde(values, bandwidth, stats::KDE_GRID_POINTS) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DistributionSummary {
        five_number,
        kde,
        kde_refused,
    })
}

/// `t_utc_ms,rmssd_ms,n_intervals[,z]`
pub fn write_rmssd_csv<W: Write>(
    series: &RmssdSeries,
    z: Option<&StandardizedSeries>,
    mut out: W,
) -> std::io::Result<()> {
    match z {
        None => {
            writeln!(out, "t_utc_ms,rmssd_ms,n_intervals")?;
            for p in &series.points {
                writeln!(out, "{},{},{}", p.t.0, g6(p.rmssd_ms), p.n_intervals)?;
            }
        }
        Some(zs) => {
            writeln!(out, "t_utc_ms,rmssd_ms,n_intervals,z")?;
            let mut j = 0;
            for p in &series.points {
                while j < zs.points.len() && zs.points[j].t < p.t {
                    j += 1;
                }
                let z = (j < zs.points.len() && zs.points[j].t == p.t).then(|| zs.points[j].z);
                writeln!(
                    out,
                    "{},{},{},{}",
                    p.t.0,
                    g6(p.rmssd_ms),
                    p.n_intervals,
                    z.map(g6).unwrap_or_default()
                )?;
            }
        }
    }
    Ok(())
}
