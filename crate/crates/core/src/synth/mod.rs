//! Seeded synthetic sessions with known ground truth.
//!
//! EDA is tonic + IRF-convolved impulses + Gaussian noise, IBIs are drawn so
//! that successive differences have a prescribed RMS, and GPS fixes follow a
//! route at a piecewise-constant speed. Every stream is generated from its own
//! ChaCha stream so editing one plan leaves the others unchanged.

mod fixtures;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eda::{IrfOperator, IrfParams};
use crate::error::{Error, Result};
use crate::esm::Category;
use crate::geo::haversine_m;
use crate::ingest::{
    write_eda, write_esm, write_gps, write_ibi, EdaSample, EdaSeries, EsmResponse, GpsPoint, GpsTrack,
    IbiSample, IbiSeries, LatLon, SurveyType,
};
use crate::time::{Timestamp, TzOffset};

pub use fixtures::{
    composite_spec, fixture_specs, fixture_suite, multi_day_spec, report_texts, walkability_grid, Fixture,
};

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub const fn new(start_s: f64, end_s: f64) -> Self {
        Span { start_s, end_s }
    }

    fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t <= self.end_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub participant_id: String,
    pub seed: u64,
    /// UTC start of every stream.
    pub start_ms: i64,
    pub duration_s: f64,
    /// Minutes east of UTC.
    pub tz_offset_min: i32,
    pub ibi: IbiPlan,
    pub eda: EdaPlan,
    pub gps: GpsPlan,
    pub esm: Option<EsmPlan>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            name: "scenario".into(),
            participant_id: "p01".into(),
            seed: 1,
            // 2024-03-04T14:00 at UTC−5.
            start_ms: 1_709_578_800_000,
            duration_s: 3600.0,
            tz_offset_min: -300,
            ibi: IbiPlan::default(),
            eda: EdaPlan::default(),
            gps: GpsPlan::default(),
            esm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmssdDip {
    /// Interval over which the windowed RMSSD sits at the target.
    pub start_s: f64,
    pub end_s: f64,
    pub rmssd_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbiPlan {
    pub mean_ms: f64,
    /// Baseline RMS of successive differences.
    pub rmssd_ms: f64,
    /// RMSSD window the dips are shaped for; beats from `start − window`
    /// to `end` are drawn at the dip level.
    pub window_s: f64,
    pub dips: Vec<RmssdDip>,
}

impl Default for IbiPlan {
    fn default() -> Self {
        IbiPlan {
            mean_ms: 850.0,
            rmssd_ms: 50.0,
            window_s: 300.0,
            dips: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impulse {
    pub t_s: f64,
    /// Driver area, µS·s. Exactly one of `area` and `amplitude_us` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    /// Peak height of the isolated response, µS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_us: Option<f64>,
}

impl Impulse {
    pub fn area(t_s: f64, area: f64) -> Self {
        Impulse {
            t_s,
            area: Some(area),
            amplitude_us: None,
        }
    }

    pub fn amplitude(t_s: f64, amplitude_us: f64) -> Self {
        Impulse {
            t_s,
            area: None,
            amplitude_us: Some(amplitude_us),
        }
    }
}

/// Poisson-like background responses with a minimum spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomScrs {
    pub per_min: f64,
    pub min_separation_s: f64,
    pub amplitude_us: (f64, f64),
}

impl Default for RandomScrs {
    fn default() -> Self {
        RandomScrs {
            per_min: 1.0,
            min_separation_s: 10.0,
            amplitude_us: (0.1, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaPlan {
    pub rate_hz: f64,
    pub irf: IrfParams,
    /// (seconds, µS) knots of a piecewise-linear tonic level, held constant
    /// beyond the ends.
    pub tonic_knots: Vec<(f64, f64)>,
    pub impulses: Vec<Impulse>,
    pub background: Option<RandomScrs>,
    /// Background responses are suppressed inside these.
    pub quiet: Vec<Span>,
    pub noise_sd: f64,
    /// When set, overrides `noise_sd` with sqrt(mean(phasic²) / 10^(snr/10)).
    pub snr_db: Option<f64>,
    pub gaps: Vec<Span>,
}

impl Default for EdaPlan {
    fn default() -> Self {
        EdaPlan {
            rate_hz: 4.0,
            irf: IrfParams::default(),
            tonic_knots: vec![(0.0, 2.0)],
            impulses: Vec::new(),
            background: None,
            quiet: Vec::new(),
            noise_sd: 0.0,
            snr_db: None,
            gaps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    /// Closed circle; chords of short arcs match the arc length closely, so
    /// derived speeds track the profile.
    Circle { center: LatLon, radius_m: f64 },
    /// Polyline traversed back and forth.
    Waypoints { points: Vec<LatLon> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLeg {
    pub start_s: f64,
    pub end_s: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicateBurst {
    pub t_s: f64,
    /// Extra fixes 200 ms apart after the fix nearest `t_s`.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpsPlan {
    pub route: Route,
    pub interval_s: f64,
    /// Outside every leg the participant is stationary.
    pub legs: Vec<SpeedLeg>,
    pub duplicate_bursts: Vec<DuplicateBurst>,
    /// Gaussian position noise, metres; 0 disables.
    pub jitter_m: f64,
    /// Indices of fixes to drop (missed samples).
    pub missed: Vec<usize>,
    /// Walking band used to label ground-truth walking intervals.
    pub walking_band_mps: (f64, f64),
}

impl Default for GpsPlan {
    fn default() -> Self {
        GpsPlan {
            route: Route::Circle {
                center: LatLon::new(39.9526, -75.1652),
                radius_m: 3000.0,
            },
            interval_s: 300.0,
            legs: Vec::new(),
            duplicate_bursts: Vec::new(),
            jitter_m: 0.0,
            missed: Vec::new(),
            walking_band_mps: (0.5, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedText {
    pub text: String,
    /// Expected category; absent for neutral text.
    pub category: Option<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsmPlan {
    pub study_days: u32,
    /// Fraction of days answered for each survey type (rounded to a count).
    pub response_rate: f64,
    /// Extra responses per type missing a required item.
    pub incomplete_per_type: u32,
    /// Assigned in order to the complete end-of-day responses.
    pub texts: Vec<PlannedText>,
}

impl Default for EsmPlan {
    fn default() -> Self {
        EsmPlan {
            study_days: 14,
            response_rate: 0.5,
            incomplete_per_type: 1,
            texts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeSpan {
    pub fn duration_s(&self) -> f64 {
        self.end.diff_secs(self.start)
    }

    /// Intersection over union of two closed intervals.
    pub fn iou(&self, other: &TimeSpan) -> f64 {
        let inter = (self.end.0.min(other.end.0) - self.start.0.max(other.start.0)).max(0) as f64;
        let union = (self.end.0.max(other.end.0) - self.start.0.min(other.start.0)) as f64;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueScr {
    pub onset: Timestamp,
    /// Sample at which the isolated response peaks.
    pub peak: Timestamp,
    pub amplitude_us: f64,
    pub area: f64,
    /// False when the onset falls in an EDA gap.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueReport {
    pub t: Timestamp,
    pub text: String,
    pub category: Option<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participant_id: String,
    pub scr_events: Vec<TrueScr>,
    pub eda_noise_sd: f64,
    pub eda_gaps: Vec<TimeSpan>,
    /// Intervals over which the windowed RMSSD sits at a dip target.
    pub low_rmssd: Vec<TimeSpan>,
    /// First to last fix whose derived speed lies in the walking band.
    pub walking: Vec<TimeSpan>,
    pub gps_duplicates: usize,
    pub retained_responses: BTreeMap<SurveyType, usize>,
    pub excluded_responses: usize,
    pub reports: Vec<TrueReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionBundle {
    pub participant_id: String,
    pub tz: TzOffset,
    pub ibi: IbiSeries,
    pub eda: EdaSeries,
    /// Noise-free tonic and phasic components at the EDA sample times.
    pub eda_tonic: Vec<f64>,
    pub eda_phasic: Vec<f64>,
    pub gps: GpsTrack,
    pub esm: Vec<EsmResponse>,
}

fn invalid(spec: &ScenarioSpec, msg: impl std::fmt::Display) -> Error {
    Error::Parameter(format!("scenario {}: {msg}", spec.name))
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.duration_s;
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(self, "duration_s must be positive"));
        }
        let inside = |s: f64, e: f64| 0.0 <= s && s < e && e <= d;
        for dip in &self.ibi.dips {
            if !inside(dip.start_s, dip.end_s) || dip.rmssd_ms < 0.0 {
                return Err(invalid(self, format!("dip {dip:?} outside the record or negative")));
            }
        }
        if !(self.ibi.mean_ms >= 300.0 && self.ibi.mean_ms <= 2000.0) || self.ibi.rmssd_ms < 0.0 {
            return Err(invalid(self, "ibi mean must be within 300..2000 ms and rmssd ≥ 0"));
        }
        let e = &self.eda;
        e.irf.validate()?;
        if !(e.rate_hz > 0.0) || e.tonic_knots.is_empty() || e.noise_sd < 0.0 {
            return Err(invalid(self, "eda needs a positive rate, tonic knots and noise_sd ≥ 0"));
        }
        if e.tonic_knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid(self, "tonic knots must be strictly increasing in time"));
        }
        for imp in &e.impulses {
            if !(0.0..d).contains(&imp.t_s) {
                return Err(invalid(self, format!("impulse at {} s outside the record", imp.t_s)));
            }
            match (imp.area, imp.amplitude_us) {
                (Some(a), None) | (None, Some(a)) if a > 0.0 => {}
                _ => return Err(invalid(self, "each impulse needs exactly one positive area or amplitude_us")),
            }
        }
        for g in e.gaps.iter().chain(&e.quiet) {
            if !inside(g.start_s, g.end_s) {
                return Err(invalid(self, format!("interval {g:?} outside the record")));
            }
        }
        if let Some(b) = &e.background {
            if b.per_min < 0.0 || b.amplitude_us.0 <= 0.0 || b.amplitude_us.1 < b.amplitude_us.0 {
                return Err(invalid(self, "background needs per_min ≥ 0 and a positive amplitude range"));
            }
        }
        let g = &self.gps;
        if !(g.interval_s > 0.0) || g.jitter_m < 0.0 {
            return Err(invalid(self, "gps interval must be positive and jitter ≥ 0"));
        }
        let mut legs = g.legs.clone();
        legs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for w in legs.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(invalid(self, "speed legs overlap"));
            }
        }
        for leg in &legs {
            if !inside(leg.start_s, leg.end_s) || leg.speed_mps < 0.0 {
                return Err(invalid(self, format!("leg {leg:?} outside the record")));
            }
        }
        if g.duplicate_bursts.iter().any(|b| b.count as f64 * 0.2 >= g.interval_s) {
            return Err(invalid(self, "duplicate burst longer than the sampling interval"));
        }
        match &g.route {
            Route::Circle { radius_m, .. } if !(*radius_m > 0.0) => {
                return Err(invalid(self, "route radius must be positive"))
            }
            Route::Waypoints { points } if points.len() < 2 => {
                return Err(invalid(self, "route needs at least two waypoints"))
            }
            _ => {}
        }
        if let Some(esm) = &self.esm {
            if esm.study_days == 0 || !(0.0..=1.0).contains(&esm.response_rate) {
                return Err(invalid(self, "esm needs study_days ≥ 1 and a rate in [0, 1]"));
            }
            let answered = (esm.response_rate * esm.study_days as f64).round() as u32;
            if answered + esm.incomplete_per_type > esm.study_days {
                return Err(invalid(self, "more responses planned than study days"));
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn at(&self, s: f64) -> Timestamp {
        Timestamp(self.start_ms + (s * 1000.0).round() as i64)
    }
}

/// Builds every stream and its ground truth. Identical specs give identical
/// output.
pub fn generate(spec: &ScenarioSpec) -> Result<(SessionBundle, GroundTruth)> {
    spec.validate()?;
    let ibi = gen_ibi(spec);
    let eda = gen_eda(spec)?;
    let (gps, walking, dups) = gen_gps(spec);
    let esm = spec.esm.as_ref().map(|p| gen_esm(spec, p)).unwrap_or_default();

    let bundle = SessionBundle {
        participant_id: spec.participant_id.clone(),
        tz: TzOffset(spec.tz_offset_min),
        ibi,
        eda: eda.series,
        eda_tonic: eda.tonic,
        eda_phasic: eda.phasic,
        gps,
        esm: esm.responses,
    };
    let truth = GroundTruth {
        participant_id: spec.participant_id.clone(),
        scr_events: eda.events,
        eda_noise_sd: eda.noise_sd,
        eda_gaps: spec
            .eda
            .gaps
            .iter()
            .map(|g| TimeSpan {
                start: spec.at(g.start_s),
                end: spec.at(g.end_s),
            })
            .collect(),
        low_rmssd: spec
            .ibi
            .dips
            .iter()
            .map(|d| TimeSpan {
                start: spec.at(d.start_s),
                end: spec.at(d.end_s),
            })
            .collect(),
        walking,
        gps_duplicates: dups,
        retained_responses: esm.retained,
        excluded_responses: esm.excluded,
        reports: esm.reports,
    };
    Ok((bundle, truth))
}

fn gen_ibi(spec: &ScenarioSpec) -> IbiSeries {
    let plan = &spec.ibi;
    let mut rng = spec.rng(1);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let level = |t_s: f64| {
        plan.dips
            .iter()
            .find(|d| t_s >= d.start_s - plan.window_s && t_s <= d.end_s)
            .map_or(plan.rmssd_ms, |d| d.rmssd_ms)
    };
    // Independent draws around the mean: successive differences then have
    // variance 2s², so s = rmssd/√2.
    let mut samples = Vec::new();
    let mut t_ms = 0.0f64;
    loop {
        let s = level(t_ms / 1000.0) / std::f64::consts::SQRT_2;
        let ibi = (plan.mean_ms + s * std.sample(&mut rng)).clamp(300.0, 2000.0);
        let ibi = (ibi * 1000.0).round() / 1000.0;
        t_ms += ibi;
        if t_ms >= spec.duration_s * 1000.0 {
            break;
        }
        samples.push(IbiSample {
            t: Timestamp(spec.start_ms + t_ms.round() as i64),
            ibi_ms: ibi,
        });
    }
    IbiSeries::new(spec.participant_id.clone(), samples)
}

struct EdaOut {
    series: EdaSeries,
    tonic: Vec<f64>,
    phasic: Vec<f64>,
    events: Vec<TrueScr>,
    noise_sd: f64,
}

fn tonic_at(knots: &[(f64, f64)], t: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 <= t);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (a, b) = (knots[i - 1], knots[i]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

fn background_impulses(spec: &ScenarioSpec, bg: &RandomScrs) -> Vec<Impulse> {
    let mut rng = spec.rng(2);
    let mut out = Vec::new();
    if bg.per_min <= 0.0 {
        return out;
    }
    let mean_gap = 60.0 / bg.per_min;
    let extra = (mean_gap - bg.min_separation_s).max(0.0);
    let mut t = bg.min_separation_s * rng.random::<f64>();
    while t < spec.duration_s {
        let amp = rng.random_range(bg.amplitude_us.0..=bg.amplitude_us.1);
        let quiet = spec.eda.quiet.iter().any(|q| q.contains(t));
        if !quiet {
            out.push(Impulse::amplitude(t, amp));
        }
        // Exponential spacing above the minimum separation.
        let u: f64 = rng.random();
        t += bg.min_separation_s + extra * -(1.0 - u).ln();
    }
    out
}

fn gen_eda(spec: &ScenarioSpec) -> Result<EdaOut> {
    let plan = &spec.eda;
    let op = IrfOperator::new(plan.irf, plan.rate_hz)?;
    let dt = 1.0 / plan.rate_hz;
    let n = (spec.duration_s * plan.rate_hz).floor() as usize;
    let peak_k = (0..op.support_len(1e-6).max(1))
        .max_by(|&a, &b| op.weight(a).total_cmp(&op.weight(b)))
        .unwrap_or(0);
    let peak_gain = op.weight(peak_k) / dt;

    let mut impulses = plan.impulses.clone();
    if let Some(bg) = &plan.background {
        impulses.extend(background_impulses(spec, bg));
    }
    impulses.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));

    let mut driver = vec![0.0; n];
    let mut events = Vec::with_capacity(impulses.len());
    for imp in &impulses {
        let k = (imp.t_s * plan.rate_hz).round() as usize;
        if k >= n {
            continue;
        }
        let area = imp.area.unwrap_or_else(|| imp.amplitude_us.unwrap_or(0.0) / peak_gain);
        driver[k] += area / dt;
        let onset_s = k as f64 * dt;
        events.push(TrueScr {
            onset: spec.at(onset_s),
            peak: spec.at(onset_s + peak_k as f64 * dt),
            amplitude_us: area * peak_gain,
            area,
            observed: !plan.gaps.iter().any(|g| g.contains(onset_s)),
        });
    }
    let mut phasic = vec![0.0; n];
    op.forward(&driver, &mut phasic);
    let tonic: Vec<f64> = (0..n).map(|i| tonic_at(&plan.tonic_knots, i as f64 * dt)).collect();

    let noise_sd = match plan.snr_db {
        Some(snr) if n > 0 => {
            let power = phasic.iter().map(|v| v * v).sum::<f64>() / n as f64;
            (power / 10f64.powf(snr / 10.0)).sqrt()
        }
        _ => plan.noise_sd,
    };
    let mut rng = spec.rng(3);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t_s = i as f64 * dt;
        let e = if noise_sd > 0.0 { noise_sd * std.sample(&mut rng) } else { 0.0 };
        if plan.gaps.iter().any(|g| t_s > g.start_s && t_s < g.end_s) {
            continue;
        }
        samples.push(EdaSample {
            t: Timestamp(spec.start_ms + (t_s * 1000.0).round() as i64),
            sc_us: tonic[i] + phasic[i] + e,
        });
    }
    let series = EdaSeries::from_samples(spec.participant_id.clone(), plan.rate_hz, samples, 2.0);
    Ok(EdaOut {
        series,
        tonic,
        phasic,
        events,
        noise_sd,
    })
}

/// Metres travelled by time `t` under the leg profile.
fn distance_at(legs: &[SpeedLeg], t: f64) -> f64 {
    legs.iter()
        .map(|l| (t.min(l.end_s) - l.start_s).max(0.0) * l.speed_mps)
        .sum()
}

fn offset(origin: LatLon, east_m: f64, north_m: f64) -> LatLon {
    let dlat = north_m / EARTH_RADIUS_M;
    let dlon = east_m / (EARTH_RADIUS_M * origin.lat.to_radians().cos());
    LatLon::new(origin.lat + dlat.to_degrees(), origin.lon + dlon.to_degrees())
}

struct RouteWalker {
    route: Route,
    cum: Vec<f64>,
}

impl RouteWalker {
    fn new(route: &Route) -> Self {
        let cum = match route {
            Route::Circle { .. } => Vec::new(),
            Route::Waypoints { points } => {
                let mut c = vec![0.0];
                for w in points.windows(2) {
                    c.push(c[c.len() - 1] + haversine_m(w[0], w[1]));
                }
                c
            }
        };
        RouteWalker {
            route: route.clone(),
            cum,
        }
    }

    fn position(&self, d: f64) -> LatLon {
        match &self.route {
            Route::Circle { center, radius_m } => {
                let theta = d / radius_m;
                // Start due south of the centre, moving east.
                offset(*center, radius_m * theta.sin(), -radius_m * theta.cos())
            }
            Route::Waypoints { points } => {
                let total = self.cum[self.cum.len() - 1];
                if total <= 0.0 {
                    return points[0];
                }
                let m = d.rem_euclid(2.0 * total);
                let s = if m > total { 2.0 * total - m } else { m };
                let i = self.cum.partition_point(|&c| c <= s).clamp(1, points.len() - 1);
                let (a, b) = (points[i - 1], points[i]);
                let len = self.cum[i] - self.cum[i - 1];
                let f = if len > 0.0 { (s - self.cum[i - 1]) / len } else { 0.0 };
                LatLon::new(a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon))
            }
        }
    }
}

fn gen_gps(spec: &ScenarioSpec) -> (GpsTrack, Vec<TimeSpan>, usize) {
    let plan = &spec.gps;
    let mut rng = spec.rng(4);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let walker = RouteWalker::new(&plan.route);
    let mut legs = plan.legs.clone();
    legs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

    let n = (spec.duration_s / plan.interval_s).ceil() as usize;
    let times: Vec<f64> = (0..n)
        .map(|k| k as f64 * plan.interval_s)
        .filter(|&t| t < spec.duration_s)
        .collect();
    let mut points = Vec::with_capacity(times.len());
    let mut kept_times = Vec::with_capacity(times.len());
    let mut dups = 0;
    for (k, &t) in times.iter().enumerate() {
        if plan.missed.contains(&k) {
            continue;
        }
        let mut p = walker.position(distance_at(&legs, t));
        if plan.jitter_m > 0.0 {
            p = offset(p, plan.jitter_m * std.sample(&mut rng), plan.jitter_m * std.sample(&mut rng));
        }
        let fix = |ms: i64| GpsPoint {
            t: Timestamp(spec.start_ms + (t * 1000.0).round() as i64 + ms),
            lat: p.lat,
            lon: p.lon,
            speed_mps: None,
        };
        points.push(fix(0));
        kept_times.push(t);
        let burst = plan
            .duplicate_bursts
            .iter()
            .filter(|b| (b.t_s / plan.interval_s).round() as usize == k)
            .map(|b| b.count)
            .sum::<usize>();
        for j in 1..=burst {
            points.push(fix(200 * j as i64));
        }
        dups += burst;
    }

    // A fix is walking when the average speed over the interval that ends at
    // it lies in the band; the first fix takes the second's label.
    let (lo, hi) = plan.walking_band_mps;
    let mut walking_fix: Vec<bool> = kept_times
        .windows(2)
        .map(|w| {
            let v = (distance_at(&legs, w[1]) - distance_at(&legs, w[0])) / (w[1] - w[0]);
            v >= lo && v <= hi
        })
        .collect();
    if let Some(&first) = walking_fix.first() {
        walking_fix.insert(0, first);
    }
    let mut walking = Vec::new();
    let mut i = 0;
    while i < walking_fix.len() {
        if !walking_fix[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i + 1 < walking_fix.len() && walking_fix[i + 1] {
            i += 1;
        }
        if i > s {
            walking.push(TimeSpan {
                start: spec.at(kept_times[s]),
                end: spec.at(kept_times[i]),
            });
        }
        i += 1;
    }
    (GpsTrack::new(spec.participant_id.clone(), points), walking, dups)
}

#[derive(Default)]
struct EsmOut {
    responses: Vec<EsmResponse>,
    retained: BTreeMap<SurveyType, usize>,
    excluded: usize,
    reports: Vec<TrueReport>,
}

pub fn survey_time(ty: SurveyType) -> NaiveTime {
    let h = match ty {
        SurveyType::Morning => 8,
        SurveyType::Afternoon => 13,
        SurveyType::Evening => 18,
        SurveyType::EndOfDay => 21,
    };
    NaiveTime::from_hms_opt(h, 0, 0).expect("valid hour")
}

fn gen_esm(spec: &ScenarioSpec, plan: &EsmPlan) -> EsmOut {
    let mut rng = spec.rng(5);
    let tz = TzOffset(spec.tz_offset_min);
    let first_day = tz.local_date(Timestamp(spec.start_ms));
    let answered = (plan.response_rate * plan.study_days as f64).round() as usize;
    let incomplete = plan.incomplete_per_type as usize;

    let mut responses = Vec::new();
    let mut retained = BTreeMap::new();
    for ty in SurveyType::ALL {
        let mut days: Vec<u32> = (0..plan.study_days).collect();
        days.shuffle(&mut rng);
        let complete_days = &days[..answered];
        let partial_days = &days[answered..answered + incomplete];
        for (&day, complete) in complete_days
            .iter()
            .map(|d| (d, true))
            .chain(partial_days.iter().map(|d| (d, false)))
        {
            let date = first_day + Duration::days(day as i64);
            let t = tz.to_utc(date, survey_time(ty));
            let mut r = EsmResponse::empty(spec.participant_id.clone(), ty, t);
            r.stress_0_10 = complete.then(|| rng.random_range(0..=10));
            r.valence = Some(rng.random_range(-3..=3));
            r.arousal = Some(rng.random_range(0..=6));
            if ty.allows_sleep() {
                r.sleep_quality_1_5 = Some(rng.random_range(1..=5));
            }
            if ty.allows_walking() {
                r.walked_today = Some(rng.random_bool(0.8));
                r.walk_minutes = Some(rng.random_range(0..=90));
            }
            responses.push(r);
        }
        retained.insert(ty, answered);
    }
    responses.sort_by_key(|r| (r.t, r.survey_type));

    let mut reports = Vec::new();
    let mut texts = plan.texts.iter();
    for r in responses
        .iter_mut()
        .filter(|r| r.survey_type == SurveyType::EndOfDay && r.stress_0_10.is_some())
    {
        let Some(pt) = texts.next() else { break };
        r.infra_text = Some(pt.text.clone());
        reports.push(TrueReport {
            t: r.t,
            text: pt.text.clone(),
            category: pt.category,
        });
    }
    EsmOut {
        responses,
        retained,
        excluded: incomplete * SurveyType::ALL.len(),
        reports,
    }
}

/// File names written by [`write_bundle`].
pub const IBI_FILE: &str = "ibi.csv";
pub const EDA_FILE: &str = "eda.csv";
pub const GPS_FILE: &str = "gps.csv";
pub const ESM_FILE: &str = "esm.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes the streams in the ingest formats plus `truth.json` into `dir`.
pub fn write_bundle(dir: &Path, bundle: &SessionBundle, truth: &GroundTruth) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let path = dir.join(name);
        fs::File::create(&path)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(path, e))
    };
    let io = |name: &str| {
        let path = dir.join(name);
        move |e| Error::io(path, e)
    };
    write_ibi(&bundle.ibi, create(IBI_FILE)?).map_err(io(IBI_FILE))?;
    write_eda(&bundle.eda, create(EDA_FILE)?).map_err(io(EDA_FILE))?;
    write_gps(&bundle.gps, create(GPS_FILE)?).map_err(io(GPS_FILE))?;
    write_esm(&bundle.esm, create(ESM_FILE)?)?;
    let json = serde_json::to_string_pretty(truth)?;
    fs::write(dir.join(TRUTH_FILE), json + "\n").map_err(io(TRUTH_FILE))?;
    Ok(())
}
