//! Study-level artifacts: JSON summary, episode and survey tables, a GeoJSON
//! map, SVG charts and composite time-series panels. Everything is rendered
//! in memory first so a run either writes a complete report or none.

pub mod svg;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::config::PipelineConfig;
use crate::eda::{write_decomposition_csv, write_features_csv, IrfFit, IrfParams};
use crate::error::{Error, Result};
use crate::esm::{category_counts, write_frequencies_csv, write_rates_csv, write_reports_csv, Category, ResponseRate};
use crate::format::{g6, g6_opt};
use crate::fuse::{write_aligned_csv, write_episodes_csv, ArousalEpisode, DayThreshold, EpisodeKind};
use crate::geo::write_segments_csv;
use crate::hrv::{summarize_distribution, write_rmssd_csv, DailyBaseline, DistributionSummary, StandardizeScope};
use crate::ingest::{EsmResponse, ParseReport, SurveyType};
use crate::pipeline::{ParticipantFailure, ParticipantOutput, RunOutcome};
use crate::stats::Bandwidth;
use crate::time::{Timestamp, TzOffset};

pub const REPORT_DIR: &str = "report";
pub const PARTICIPANT_DIR: &str = "participants";
pub const CONFIG_ECHO: &str = "effective_config.toml";
pub const COMPOSITE_PANELS: [&str; 5] = ["rmssd", "walking", "eda", "scr_freq", "events"];

/// A variable's boxplot statistics and density, or why there are none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub n: usize,
    pub distribution: Option<DistributionSummary>,
    pub note: Option<String>,
}

impl VariableSummary {
    pub fn of(values: &[f64], bandwidth: Bandwidth) -> Self {
        match summarize_distribution(values, bandwidth) {
            Ok(d) => VariableSummary {
                n: values.len(),
                distribution: Some(d),
                note: None,
            },
            Err(e) => VariableSummary {
                n: values.len(),
                distribution: None,
                note: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZSummary {
    pub scope: StandardizeScope,
    pub mean: f64,
    pub sd: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdaSummary {
    pub irf: IrfParams,
    pub irf_fit: Option<IrfFit>,
    pub residual_rms: f64,
    pub noise_sd: f64,
    pub n_samples: usize,
    pub n_segments: usize,
    pub n_skipped_segments: usize,
    pub n_scr: usize,
    pub n_significant_scr: usize,
    pub n_feature_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkingSummary {
    pub n_segments: usize,
    pub total_s: f64,
    pub gps_duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySummary {
    pub retained: usize,
    pub excluded: usize,
    pub problem_days: usize,
    pub stress: VariableSummary,
    pub valence: VariableSummary,
    pub arousal: VariableSummary,
    pub sleep_quality: VariableSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantSummary {
    pub participant_id: String,
    pub tz_offset_min: i32,
    pub inputs: Vec<ParseReport>,
    pub rmssd: VariableSummary,
    pub baseline_rmssd: VariableSummary,
    pub baseline_nights: Vec<DailyBaseline>,
    pub z: Option<ZSummary>,
    pub eda: EdaSummary,
    pub walking: WalkingSummary,
    pub rmssd_thresholds: Vec<DayThreshold>,
    pub scr_thresholds: Vec<DayThreshold>,
    pub episodes: BTreeMap<EpisodeKind, usize>,
    pub survey: SurveySummary,
    pub composites: Vec<CompositeWindow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordCount {
    pub word: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub study_days: usize,
    pub participants: Vec<ParticipantSummary>,
    pub failures: Vec<ParticipantFailure>,
    pub episodes: Vec<ArousalEpisode>,
    pub survey_inputs: Vec<ParseReport>,
    pub walkability_input: Option<ParseReport>,
    pub n_reports: usize,
    pub n_neutral_reports: usize,
    pub categories: BTreeMap<Category, usize>,
    pub top_words: Vec<WordCount>,
    pub response_rates: Vec<ResponseRate>,
}

/// The summary plus every report file, keyed by path relative to the
/// report directory.
#[derive(Debug, Clone)]
pub struct BuiltReport {
    pub summary: StudyReport,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl BuiltReport {
    pub fn write(&self, report_dir: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            let path = report_dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

/// Floats rounded to 6 significant digits, so serialised JSON is stable.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            g6(x)
                .parse::<f64>()
                .ok()
                .and_then(Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = round_floats(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn survey_values(rs: &[EsmResponse], f: impl Fn(&EsmResponse) -> Option<i64>) -> Vec<f64> {
    rs.iter().filter_map(&f).map(|v| v as f64).collect()
}

fn summarize_participant(
    cfg: &PipelineConfig,
    out: &ParticipantOutput,
    outcome: &RunOutcome,
    composites: Vec<CompositeWindow>,
) -> ParticipantSummary {
    let bw = cfg.hrv.bandwidth;
    let d = &out.decomposition;
    let empty = Vec::new();
    let responses = outcome.esm.dataset.participants.get(&out.participant_id).unwrap_or(&empty);
    let mornings: Vec<EsmResponse> = responses
        .iter()
        .filter(|r| r.survey_type == SurveyType::Morning)
        .cloned()
        .collect();
    let mut episodes = BTreeMap::new();
    for det in [&out.rmssd_episodes, &out.scr_episodes] {
        episodes.insert(det.kind, det.episodes.len());
    }
    ParticipantSummary {
        participant_id: out.participant_id.clone(),
        tz_offset_min: out.tz.minutes(),
        inputs: out.inputs.clone(),
        rmssd: VariableSummary::of(&out.rmssd.values(), bw),
        baseline_rmssd: VariableSummary::of(&out.baseline.values(), bw),
        baseline_nights: out.baseline.days.clone(),
        z: out.z.as_ref().map(|z| ZSummary {
            scope: z.scope,
            mean: z.mean,
            sd: z.sd,
            degenerate: z.degenerate,
        }),
        eda: EdaSummary {
            irf: d.irf,
            irf_fit: out.irf_fit.clone(),
            residual_rms: d.residual_rms,
            noise_sd: d.noise_sd,
            n_samples: d.len(),
            n_segments: d.segments.len(),
            n_skipped_segments: d.skipped.len(),
            n_scr: d.events.len(),
            n_significant_scr: d.significant_events().count(),
            n_feature_windows: out.features.len(),
        },
        walking: WalkingSummary {
            n_segments: out.segments.len(),
            total_s: out.segments.iter().map(|s| s.duration_s()).sum(),
            gps_duplicates: out.gps_duplicates,
        },
        rmssd_thresholds: out.rmssd_episodes.days.clone(),
        scr_thresholds: out.scr_episodes.days.clone(),
        episodes,
        survey: SurveySummary {
            retained: responses.len(),
            excluded: outcome
                .esm
                .dataset
                .excluded
                .iter()
                .filter(|e| e.participant_id == out.participant_id)
                .count(),
            problem_days: outcome.esm.problem_days.get(&out.participant_id).copied().unwrap_or(0),
            stress: VariableSummary::of(&survey_values(responses, |r| r.stress_0_10), bw),
            valence: VariableSummary::of(&survey_values(responses, |r| r.valence), bw),
            arousal: VariableSummary::of(&survey_values(responses, |r| r.arousal), bw),
            sleep_quality: VariableSummary::of(&survey_values(&mornings, |r| r.sleep_quality_1_5), bw),
        },
        composites,
        warnings: out.warnings.clone(),
    }
}

/// Threshold of the local day containing `t`.
fn day_threshold(days: &[DayThreshold], tz: TzOffset, t: Timestamp) -> Option<f64> {
    let date: NaiveDate = tz.local_date(t);
    days.iter().find(|d| d.local_date == date).and_then(|d| d.threshold)
}

/// First and last aligned grid times.
pub fn coverage(out: &ParticipantOutput) -> Option<(Timestamp, Timestamp)> {
    let s = &out.aligned.samples;
    Some((s.first()?.t, s.last()?.t))
}

/// Default composite window: `length_s` long, centred on the earliest
/// episode (or starting at the beginning of the record), clipped to
/// coverage.
pub fn auto_window(out: &ParticipantOutput, length_s: f64) -> Option<(Timestamp, Timestamp)> {
    let (lo, hi) = coverage(out)?;
    let len = (length_s * 1000.0).round() as i64;
    let first = out
        .rmssd_episodes
        .episodes
        .iter()
        .chain(&out.scr_episodes.episodes)
        .min_by_key(|e| e.start);
    let start = match first {
        Some(e) => (e.start.0 + e.end.0) / 2 - len / 2,
        None => lo.0,
    };
    let start = start.min(hi.0 - len).max(lo.0);
    let step = (out.aligned.step_s * 1000.0).round().max(1.0) as i64;
    let start = crate::time::ceil_to_grid(start, step);
    Some((Timestamp(start), Timestamp((start + len).min(hi.0))))
}

/// CSV panels for `[start, end]`: RMSSD with its daily threshold, walking
/// mask, EDA components, SCR frequency with its threshold, and events.
pub fn composite_export(out: &ParticipantOutput, start: Timestamp, end: Timestamp) -> Result<Vec<(String, Vec<u8>)>> {
    let (lo, hi) = coverage(out).ok_or_else(|| {
        Error::InsufficientData(format!("{}: no aligned samples", out.participant_id))
    })?;
    if start < lo || end > hi || end <= start {
        return Err(Error::InsufficientData(format!(
            "{}: composite window {}..{} outside coverage {}..{}",
            out.participant_id, start.0, end.0, lo.0, hi.0
        )));
    }
    let tz = out.tz;
    let a = &out.aligned;
    let i0 = a.samples.partition_point(|s| s.t < start);
    let i1 = a.samples.partition_point(|s| s.t <= end);
    let samples = &a.samples[i0..i1];
    let rmssd_days = &out.rmssd_episodes.days;
    let scr_days = &out.scr_episodes.days;

    let rmssd = csv_bytes(|w| {
        writeln!(w, "t_utc_ms,rmssd_ms,threshold_ms")?;
        for s in samples {
            writeln!(w, "{},{},{}", s.t.0, g6_opt(s.rmssd_ms), g6_opt(day_threshold(rmssd_days, tz, s.t)))?;
        }
        Ok(())
    });
    let walking = csv_bytes(|w| {
        writeln!(w, "t_utc_ms,walking,segment_id")?;
        for s in samples {
            writeln!(w, "{},{},{}", s.t.0, u8::from(s.walking()), a.segment_id(s).unwrap_or(""))?;
        }
        Ok(())
    });
    let d = &out.decomposition;
    let eda = csv_bytes(|w| {
        writeln!(w, "t_utc_ms,raw_us,tonic_us,phasic_us,driver_us_s")?;
        let j0 = d.t.partition_point(|&t| t < start);
        let j1 = d.t.partition_point(|&t| t <= end);
        for j in j0..j1 {
            writeln!(
                w,
                "{},{},{},{},{}",
                d.t[j].0,
                g6(d.raw[j]),
                g6(d.tonic[j]),
                g6(d.phasic[j]),
                g6(d.driver[j])
            )?;
        }
        Ok(())
    });
    let scr = csv_bytes(|w| {
        writeln!(w, "t_utc_ms,scr_freq_per_min,threshold_per_min")?;
        for s in samples {
            writeln!(w, "{},{},{}", s.t.0, g6_opt(s.scr_freq()), g6_opt(day_threshold(scr_days, tz, s.t)))?;
        }
        Ok(())
    });
    let events = csv_bytes(|w| {
        writeln!(w, "kind,start_utc_ms,end_utc_ms,value,significant")?;
        let mut rows: Vec<(i64, u8, String)> = Vec::new();
        for e in d.events.iter().filter(|e| e.peak >= start && e.peak <= end) {
            rows.push((
                e.onset.0,
                0,
                format!("scr,{},{},{},{}", e.onset.0, e.peak.0, g6(e.amplitude_us), u8::from(e.significant)),
            ));
        }
        for det in [&out.rmssd_episodes, &out.scr_episodes] {
            for e in det.episodes.iter().filter(|e| e.end > start && e.start <= end) {
                rows.push((
                    e.start.0,
                    1,
                    format!("{},{},{},{},", e.kind.as_str(), e.start.0, e.end.0, g6(e.extremum)),
                ));
            }
        }
        rows.sort();
        for (_, _, r) in rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    });
    Ok(COMPOSITE_PANELS
        .iter()
        .map(|p| p.to_string())
        .zip([rmssd, walking, eda, scr, events])
        .collect())
}

fn map_layers(outs: &[&ParticipantOutput]) -> Value {
    let r = |x: f64| round_floats(json!(x));
    let ro = |x: Option<f64>| x.map(r).unwrap_or(Value::Null);
    let mut features = Vec::new();
    for out in outs {
        let pts = &out.aligned.points;
        for p in pts {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.point.lon, p.point.lat]},
                "properties": {
                    "layer": "fix",
                    "participant_id": out.participant_id,
                    "t_utc_ms": p.point.t.0,
                    "z_rmssd": ro(p.z_rmssd),
                    "walkability": ro(p.walkability),
                    "cell_id": p.cell_id,
                    "segment_id": p.segment_id,
                }
            }));
        }
        for s in &out.segments {
            let coords: Vec<[f64; 2]> = s.points.iter().map(|p| [p.lon, p.lat]).collect();
            let zs: Vec<f64> = pts
                .iter()
                .filter(|p| p.segment_id.as_deref() == Some(&s.segment_id))
                .filter_map(|p| p.z_rmssd)
                .collect();
            let mean_z = (!zs.is_empty()).then(|| zs.iter().sum::<f64>() / zs.len() as f64);
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "layer": "walking_segment",
                    "participant_id": out.participant_id,
                    "segment_id": s.segment_id,
                    "start_utc_ms": s.start.0,
                    "end_utc_ms": s.end.0,
                    "mean_speed_mps": r(s.mean_speed_mps),
                    "mean_z_rmssd": ro(mean_z),
                }
            }));
        }
        for det in [&out.rmssd_episodes, &out.scr_episodes] {
            for e in &det.episodes {
                let i = out.aligned.samples.partition_point(|s| s.t < e.start);
                let Some(loc) = out.aligned.samples.get(i).and_then(|s| out.aligned.location(s)) else {
                    continue;
                };
                features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [loc.point.lon, loc.point.lat]},
                    "properties": {
                        "layer": "episode",
                        "participant_id": out.participant_id,
                        "kind": e.kind.as_str(),
                        "start_utc_ms": e.start.0,
                        "end_utc_ms": e.end.0,
                        "threshold": r(e.threshold),
                        "extremum": r(e.extremum),
                        "segment_id": e.segment_id,
                    }
                }));
            }
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}

fn five_numbers<'a>(
    summaries: &'a [ParticipantSummary],
    pick: impl Fn(&'a ParticipantSummary) -> &'a VariableSummary,
) -> Vec<(String, crate::stats::FiveNumber)> {
    summaries
        .iter()
        .filter_map(|s| {
            pick(s)
                .distribution
                .as_ref()
                .map(|d| (s.participant_id.clone(), d.five_number))
        })
        .collect()
}

fn charts(summary: &StudyReport) -> BTreeMap<String, Vec<u8>> {
    let ps = &summary.participants;
    let mut files = BTreeMap::new();
    let mut put = |name: &str, svg: String| {
        files.insert(format!("charts/{name}.svg"), svg.into_bytes());
    };
    put("boxplot_stress", svg::boxplot("Stress", "stress (0-10)", &five_numbers(ps, |s| &s.survey.stress)));
    put("boxplot_valence", svg::boxplot("Valence", "valence", &five_numbers(ps, |s| &s.survey.valence)));
    put("boxplot_arousal", svg::boxplot("Arousal", "arousal", &five_numbers(ps, |s| &s.survey.arousal)));
    put(
        "boxplot_sleep_quality",
        svg::boxplot("Sleep quality", "sleep quality (1-5)", &five_numbers(ps, |s| &s.survey.sleep_quality)),
    );
    put(
        "boxplot_baseline_rmssd",
        svg::boxplot("Sleep baseline RMSSD", "RMSSD (ms)", &five_numbers(ps, |s| &s.baseline_rmssd)),
    );
    put("boxplot_rmssd", svg::boxplot("Rolling RMSSD", "RMSSD (ms)", &five_numbers(ps, |s| &s.rmssd)));
    let curves: Vec<(String, &crate::stats::KdeCurve)> = ps
        .iter()
        .filter_map(|s| {
            s.rmssd
                .distribution
                .as_ref()
                .and_then(|d| d.kde.as_ref())
                .map(|k| (s.participant_id.clone(), k))
        })
        .collect();
    put("kde_rmssd", svg::kde("Rolling RMSSD density", "RMSSD (ms)", &curves));
    let cats: Vec<(String, f64)> = summary
        .categories
        .iter()
        .map(|(c, n)| (c.as_str().to_string(), *n as f64))
        .collect();
    put("categories", svg::bars("Reported infrastructure problems", "reports", &cats));
    let words: Vec<(String, f64)> = summary
        .top_words
        .iter()
        .map(|w| (w.word.clone(), w.count as f64))
        .collect();
    put("top_words", svg::bars("Most frequent words", "count", &words));
    files
}

/// Renders the whole report. Composite windows that cannot be exported are
/// recorded as failures of their participant.
pub fn build_report(cfg: &PipelineConfig, outcome: &RunOutcome) -> Result<BuiltReport> {
    if outcome.outputs.is_empty() {
        return Err(Error::InsufficientData("no participant produced outputs".into()));
    }
    let mut files = BTreeMap::new();
    let mut failures = outcome.failures.clone();
    let mut participants = Vec::new();
    let mut episodes = Vec::new();

    for out in &outcome.outputs {
        let pcfg = cfg.participants.iter().find(|p| p.id == out.participant_id);
        let windows: Vec<(Timestamp, Timestamp)> = match pcfg {
            Some(p) if !p.composite.is_empty() => p.composite.iter().map(|w| w.bounds()).collect(),
            _ => auto_window(out, cfg.report.composite_window_s).into_iter().collect(),
        };
        let mut composites = Vec::new();
        for (k, (start, end)) in windows.into_iter().enumerate() {
            match composite_export(out, start, end) {
                Ok(panels) => {
                    let suffix = if k == 0 { String::new() } else { format!("_{}", k + 1) };
                    let mut names = Vec::new();
                    for (panel, bytes) in panels {
                        let rel = format!("composite/{}/{panel}{suffix}.csv", out.participant_id);
                        names.push(rel.clone());
                        files.insert(rel, bytes);
                    }
                    composites.push(CompositeWindow { start, end, files: names });
                }
                Err(e) => failures.push(ParticipantFailure::new(&out.participant_id, "report_composite", &e)),
            }
        }
        episodes.extend(out.rmssd_episodes.episodes.iter().cloned());
        episodes.extend(out.scr_episodes.episodes.iter().cloned());
        participants.push(summarize_participant(cfg, out, outcome, composites));
    }
    episodes.sort_by(|a, b| {
        (&a.participant_id, a.start, a.kind).cmp(&(&b.participant_id, b.start, b.kind))
    });

    let esm = &outcome.esm;
    let summary = StudyReport {
        study_days: cfg.study_days,
        participants,
        failures,
        episodes,
        survey_inputs: esm.inputs.clone(),
        walkability_input: outcome.walkability.clone(),
        n_reports: esm.reports.len(),
        n_neutral_reports: esm.reports.iter().filter(|r| r.category.is_none()).count(),
        categories: category_counts(&esm.reports),
        top_words: esm
            .top_words
            .iter()
            .map(|(word, count)| WordCount {
                word: word.clone(),
                count: *count,
            })
            .collect(),
        response_rates: esm.rates.clone(),
    };

    files.insert("summary.json".into(), json_bytes(&summary)?);
    files.insert(
        "episodes.csv".into(),
        csv_bytes(|w| write_episodes_csv(&summary.episodes, w)),
    );
    let outs: Vec<&ParticipantOutput> = outcome.outputs.iter().collect();
    let mut map = serde_json::to_string_pretty(&map_layers(&outs))?;
    map.push('\n');
    files.insert("map.geojson".into(), map.into_bytes());
    let mut reports = Vec::new();
    write_reports_csv(&esm.reports, &mut reports)?;
    files.insert("infrastructure_reports.csv".into(), reports);
    files.insert(
        "word_frequencies.csv".into(),
        csv_bytes(|w| write_frequencies_csv(&esm.top_words, w)),
    );
    files.insert("response_rates.csv".into(), csv_bytes(|w| write_rates_csv(&esm.rates, w)));
    files.insert(
        "problem_days.csv".into(),
        csv_bytes(|w| {
            writeln!(w, "participant_id,problem_days")?;
            for (p, n) in &esm.problem_days {
                writeln!(w, "{p},{n}")?;
            }
            Ok(())
        }),
    );
    files.extend(charts(&summary));
    Ok(BuiltReport { summary, files })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Full-length per-participant tables: RMSSD with z, EDA decomposition and
/// window features, walking segments and the aligned grid.
pub fn write_participant_tables(dir: &Path, out: &ParticipantOutput) -> Result<()> {
    write_file(&dir.join("rmssd.csv"), |w| write_rmssd_csv(&out.rmssd, out.z.as_ref(), w))?;
    write_file(&dir.join("eda_decomposition.csv"), |w| write_decomposition_csv(&out.decomposition, w))?;
    write_file(&dir.join("eda_features.csv"), |w| write_features_csv(&out.features, w))?;
    write_file(&dir.join("segments.csv"), |w| write_segments_csv(&out.segments, w))?;
    write_file(&dir.join("aligned.csv"), |w| write_aligned_csv(&out.aligned, w))?;
    Ok(())
}

/// Writes the config echo, per-participant tables and the report tree
/// under the configured output directory.
pub fn write_outputs(cfg: &PipelineConfig, outcome: &RunOutcome) -> Result<BuiltReport> {
    let root = cfg.output_path();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let echo = root.join(CONFIG_ECHO);
    fs::write(&echo, cfg.to_toml()?).map_err(|e| Error::io(&echo, e))?;
    if cfg.report.participant_tables {
        for out in &outcome.outputs {
            write_participant_tables(&root.join(PARTICIPANT_DIR).join(&out.participant_id), out)?;
        }
    }
    let built = build_report(cfg, outcome)?;
    built.write(&root.join(REPORT_DIR))?;
    Ok(built)
}
