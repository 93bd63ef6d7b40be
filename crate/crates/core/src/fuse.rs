//! Temporal alignment of the modalities and per-day percentile episodes.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::eda::EdaWindowFeatures;
use crate::error::{Error, Result};
use crate::format::{g6, g6_opt, sig};
use crate::geo::{ScoredPoint, WalkingSegment};
use crate::hrv::{RmssdSeries, StandardizedSeries};
use crate::stats;
use crate::time::{ceil_to_grid, floor_to_grid, secs_to_ms, Timestamp, TzOffset};

pub use crate::stats::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub step_s: f64,
    pub physio_tolerance_s: f64,
    pub location_tolerance_s: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            step_s: 1.0,
            physio_tolerance_s: 1.0,
            location_tolerance_s: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedSample {
    pub t: Timestamp,
    pub rmssd_ms: Option<f64>,
    pub eda: Option<EdaWindowFeatures>,
    /// Index into [`AlignedSeries::points`].
    pub location: Option<u32>,
    /// Index into [`AlignedSeries::segments`]; set iff walking.
    pub segment: Option<u32>,
}

impl AlignedSample {
    pub fn walking(&self) -> bool {
        self.segment.is_some()
    }

    pub fn scr_freq(&self) -> Option<f64> {
        self.eda.map(|e| e.scr_freq_per_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeries {
    pub participant_id: String,
    pub step_s: f64,
    pub samples: Vec<AlignedSample>,
    pub points: Vec<ScoredPoint>,
    /// (segment_id, start, end) of the walking segments.
    pub segments: Vec<(String, Timestamp, Timestamp)>,
}

impl AlignedSeries {
    pub fn location(&self, s: &AlignedSample) -> Option<&ScoredPoint> {
        s.location.map(|i| &self.points[i as usize])
    }

    pub fn segment_id(&self, s: &AlignedSample) -> Option<&str> {
        s.segment.map(|i| self.segments[i as usize].0.as_str())
    }
}

/// Sweeps a sorted time list alongside an increasing query time and returns
/// the index of the nearest entry within the tolerance (earlier on ties).
struct Nearest<'a> {
    times: &'a [i64],
    j: usize,
    tol_ms: i64,
}

impl<'a> Nearest<'a> {
    fn new(times: &'a [i64], tol_ms: i64) -> Self {
        Nearest { times, j: 0, tol_ms }
    }

    fn at(&mut self, t: i64) -> Option<usize> {
        let ts = self.times;
        if ts.is_empty() {
            return None;
        }
        while self.j + 1 < ts.len() && ts[self.j + 1] <= t {
            self.j += 1;
        }
        let mut best: Option<(usize, i64)> = None;
        for k in [self.j, self.j + 1] {
            if k < ts.len() {
                let d = (ts[k] - t).abs();
                if d <= self.tol_ms && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Samples every modality on an epoch-aligned grid spanning the union of
/// their coverage.
pub fn align(
    participant_id: &str,
    rmssd: &RmssdSeries,
    eda: &[EdaWindowFeatures],
    segments: &[WalkingSegment],
    points: &[ScoredPoint],
    params: &AlignParams,
) -> Result<AlignedSeries> {
    let step = secs_to_ms(params.step_s)
        .ok_or_else(|| Error::Parameter(format!("step_s {} must be positive", params.step_s)))?;
    let physio_tol = (params.physio_tolerance_s * 1000.0).round() as i64;
    let loc_tol = (params.location_tolerance_s * 1000.0).round() as i64;

    let rt: Vec<i64> = rmssd.points.iter().map(|p| p.t.0).collect();
    let et: Vec<i64> = eda.iter().map(|f| f.t.0).collect();
    let gt: Vec<i64> = points.iter().map(|p| p.point.t.0).collect();
    let spans = [&rt, &et, &gt]
        .into_iter()
        .filter(|v| !v.is_empty())
        .map(|v| (v[0], v[v.len() - 1]));
    let (lo, hi) = spans.fold((i64::MAX, i64::MIN), |(a, b), (s, e)| (a.min(s), b.max(e)));

    let mut out = AlignedSeries {
        participant_id: participant_id.to_string(),
        step_s: params.step_s,
        samples: Vec::new(),
        points: points.to_vec(),
        segments: segments
            .iter()
            .map(|s| (s.segment_id.clone(), s.start, s.end))
            .collect(),
    };
    if lo > hi {
        return Ok(out);
    }

    let (mut nr, mut ne, mut ng) = (
        Nearest::new(&rt, physio_tol),
        Nearest::new(&et, physio_tol),
        Nearest::new(&gt, loc_tol),
    );
    let mut seg = 0usize;
    let (start, stop) = (ceil_to_grid(lo, step), floor_to_grid(hi, step));
    out.samples.reserve(((stop - start) / step + 1).max(0) as usize);
    let mut t = start;
    while t <= stop {
        while seg < segments.len() && segments[seg].end.0 < t {
            seg += 1;
        }
        let walking = seg < segments.len() && segments[seg].start.0 <= t;
        out.samples.push(AlignedSample {
            t: Timestamp(t),
            rmssd_ms: nr.at(t).map(|i| rmssd.points[i].rmssd_ms),
            eda: ne.at(t).map(|i| eda[i]),
            location: ng.at(t).map(|i| i as u32),
            segment: walking.then_some(seg as u32),
        });
        t += step;
    }
    Ok(out)
}

/// Copies the z-score of the nearest RMSSD point (within `tolerance_s`)
/// onto each scored point.
pub fn attach_z(points: &mut [ScoredPoint], z: &StandardizedSeries, tolerance_s: f64) {
    let zt: Vec<i64> = z.points.iter().map(|p| p.t.0).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i].point.t);
    let mut near = Nearest::new(&zt, (tolerance_s * 1000.0).round() as i64);
    for i in order {
        points[i].z_rmssd = near.at(points[i].point.t.0).map(|k| z.points[k].z);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    ParasympatheticLowRmssd,
    SympatheticHighScr,
}

impl EpisodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeKind::ParasympatheticLowRmssd => "parasympathetic_low_rmssd",
            EpisodeKind::SympatheticHighScr => "sympathetic_high_scr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmssdPool {
    #[default]
    FullDay,
    Walking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeParams {
    pub rmssd_percentile: f64,
    pub scr_percentile: f64,
    pub rmssd_pool: RmssdPool,
    pub rmssd_walking_gate: bool,
    pub scr_walking_gate: bool,
    pub min_episode_s: f64,
    pub min_daily_points: usize,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        EpisodeParams {
            rmssd_percentile: 5.0,
            scr_percentile: 95.0,
            rmssd_pool: RmssdPool::FullDay,
            rmssd_walking_gate: true,
            scr_walking_gate: true,
            min_episode_s: 10.0,
            min_daily_points: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArousalEpisode {
    pub participant_id: String,
    pub kind: EpisodeKind,
    pub start: Timestamp,
    /// Exclusive: the last flagged sample plus one grid step.
    pub end: Timestamp,
    pub threshold: f64,
    /// Minimum RMSSD or maximum SCR frequency inside.
    pub extremum: f64,
    pub segment_id: Option<String>,
    pub local_date: NaiveDate,
}

impl ArousalEpisode {
    pub fn duration_s(&self) -> f64 {
        self.end.diff_secs(self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayThreshold {
    pub local_date: NaiveDate,
    pub n_points: usize,
    /// Absent when the day had too few points to threshold.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDetection {
    pub kind: EpisodeKind,
    pub days: Vec<DayThreshold>,
    pub episodes: Vec<ArousalEpisode>,
}

pub fn detect_rmssd_episodes(aligned: &AlignedSeries, tz: TzOffset, params: &EpisodeParams) -> EpisodeDetection {
    detect(
        aligned,
        tz,
        params,
        EpisodeKind::ParasympatheticLowRmssd,
        |s| s.rmssd_ms,
        |s| params.rmssd_pool == RmssdPool::FullDay || s.walking(),
        params.rmssd_walking_gate,
        params.rmssd_percentile,
    )
}

pub fn detect_scr_episodes(aligned: &AlignedSeries, tz: TzOffset, params: &EpisodeParams) -> EpisodeDetection {
    detect(
        aligned,
        tz,
        params,
        EpisodeKind::SympatheticHighScr,
        AlignedSample::scr_freq,
        |_| true,
        params.scr_walking_gate,
        params.scr_percentile,
    )
}

#[allow(clippy::too_many_arguments)]
fn detect(
    aligned: &AlignedSeries,
    tz: TzOffset,
    params: &EpisodeParams,
    kind: EpisodeKind,
    value: impl Fn(&AlignedSample) -> Option<f64>,
    pooled: impl Fn(&AlignedSample) -> bool,
    walking_gate: bool,
    pct: f64,
) -> EpisodeDetection {
    let flagged = |v: f64, thr: f64| match kind {
        EpisodeKind::ParasympatheticLowRmssd => v < thr,
        EpisodeKind::SympatheticHighScr => v > thr,
    };
    let step_ms = (aligned.step_s * 1000.0).round() as i64;

    // Contiguous sample ranges per local day (samples are time-ordered).
    let mut days: BTreeMap<NaiveDate, (usize, usize)> = BTreeMap::new();
    for (i, s) in aligned.samples.iter().enumerate() {
        days.entry(tz.local_date(s.t)).and_modify(|r| r.1 = i + 1).or_insert((i, i + 1));
    }

    let mut out = EpisodeDetection {
        kind,
        days: Vec::new(),
        episodes: Vec::new(),
    };
    for (date, (lo, hi)) in days {
        let day = &aligned.samples[lo..hi];
        let pool: Vec<f64> = day.iter().filter(|s| pooled(s)).filter_map(&value).collect();
        let threshold = if pool.len() < params.min_daily_points.max(1) {
            if !pool.is_empty() {
                log::warn!(
                    "{} {date}: {} {} values, fewer than {}; no episodes",
                    aligned.participant_id,
                    pool.len(),
                    kind.as_str(),
                    params.min_daily_points
                );
            }
            None
        } else {
            stats::percentile(&pool, pct).ok()
        };
        out.days.push(DayThreshold {
            local_date: date,
            n_points: pool.len(),
            threshold,
        });
        let Some(thr) = threshold else { continue };

        let hit = |s: &AlignedSample| (!walking_gate || s.walking()) && value(s).is_some_and(|v| flagged(v, thr));
        let mut i = 0;
        while i < day.len() {
            if !hit(&day[i]) {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < day.len() && hit(&day[i + 1]) && day[i + 1].t.0 - day[i].t.0 == step_ms {
                i += 1;
            }
            let run = &day[start..=i];
            i += 1;
            let (first, last) = (run[0].t, run[run.len() - 1].t);
            let end = Timestamp(last.0 + step_ms);
            if end.diff_secs(first) < params.min_episode_s {
                continue;
            }
            let values = run.iter().filter_map(&value);
            let extremum = match kind {
                EpisodeKind::ParasympatheticLowRmssd => values.fold(f64::INFINITY, f64::min),
                EpisodeKind::SympatheticHighScr => values.fold(f64::NEG_INFINITY, f64::max),
            };
            let segment_id = aligned
                .segments
                .iter()
                .find(|(_, s, e)| *s <= first && last <= *e)
                .map(|(id, _, _)| id.clone());
            out.episodes.push(ArousalEpisode {
                participant_id: aligned.participant_id.clone(),
                kind,
                start: first,
                end,
                threshold: thr,
                extremum,
                segment_id,
                local_date: date,
            });
        }
    }
    out
}

pub const EPISODE_HEADER: &str = "participant_id,kind,start,end,threshold,extremum,segment_id,local_date";

/// `participant_id,kind,start,end,threshold,extremum,segment_id,local_date`
pub fn write_episodes_csv<W: Write>(episodes: &[ArousalEpisode], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EPISODE_HEADER}")?;
    for e in episodes {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.participant_id,
            e.kind.as_str(),
            e.start.0,
            e.end.0,
            g6(e.threshold),
            g6(e.extremum),
            e.segment_id.as_deref().unwrap_or(""),
            e.local_date
        )?;
    }
    Ok(())
}

/// Coordinates keep 9 significant digits (about 1 cm).
fn coord(x: Option<f64>) -> String {
    x.map(|v| sig(v, 9)).unwrap_or_default()
}

/// One row per aligned sample, modalities left blank when absent.
pub fn write_aligned_csv<W: Write>(aligned: &AlignedSeries, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "t_utc_ms,rmssd_ms,scr_freq_per_min,iscr,mean_scl,lat,lon,cell_id,walkability,walking,segment_id"
    )?;
    for s in &aligned.samples {
        let loc = aligned.location(s);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.t.0,
            g6_opt(s.rmssd_ms),
            g6_opt(s.eda.map(|e| e.scr_freq_per_min)),
            g6_opt(s.eda.map(|e| e.iscr_us_s)),
            g6_opt(s.eda.map(|e| e.mean_scl_us)),
            coord(loc.map(|p| p.point.lat)),
            coord(loc.map(|p| p.point.lon)),
            loc.and_then(|p| p.cell_id.as_deref()).unwrap_or(""),
            g6_opt(loc.and_then(|p| p.walkability)),
            u8::from(s.walking()),
            aligned.segment_id(s).unwrap_or("")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_earlier_on_ties_and_respects_tolerance() {
        let ts = [0, 2000, 10_000];
        let mut n = Nearest::new(&ts, 1000);
        assert_eq!(n.at(0), Some(0));
        assert_eq!(n.at(1000), Some(0));
        assert_eq!(n.at(1500), Some(1));
        assert_eq!(n.at(5000), None);
        assert_eq!(n.at(9000), Some(2));
        assert_eq!(n.at(11_001), None);
    }

    #[test]
    fn percentile_reexport_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 5.0).unwrap() - 5.95).abs() < 1e-12);
        assert_eq!(percentile(&[3.5], 73.0).unwrap(), 3.5);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 100.0);
        assert!(percentile(&[], 50.0).is_err());
    }
}
