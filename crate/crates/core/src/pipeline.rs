//! Per-participant orchestration: ingest, then HRV, EDA and GPS in parallel,
//! then alignment and episode detection. Survey analysis runs once over the
//! whole roster. A participant's failure never touches the others.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ParticipantConfig, PipelineConfig};
use crate::eda::{decompose, optimize_irf, window_features, EdaDecomposition, EdaWindowFeatures, IrfFit};
use crate::error::{Error, Result};
use crate::esm::{
    default_stopwords, infrastructure_reports, merge_surveys, parse_word_list, problem_day_counts,
    response_rates, word_frequencies, EsmDataset, InfrastructureReport, NeutralFilter, ResponseRate,
};
use crate::fuse::{align, attach_z, detect_rmssd_episodes, detect_scr_episodes, AlignedSeries, EpisodeDetection};
use crate::geo::{dedup, derive_speed, score_cells, spatial_join, tag_segments, walking_segments, WalkingSegment};
use crate::hrv::{rolling_rmssd, sleep_baseline_from, standardize, BaselineSummary, RmssdSeries, StandardizedSeries};
use crate::ingest::{
    parse_eda, parse_esm, parse_gps, parse_ibi, parse_walkability, EdaSeries, EsmResponse, ParseReport,
    WalkabilityCell,
};
use crate::time::TzOffset;

/// Everything computed for one participant.
#[derive(Debug, Clone)]
pub struct ParticipantOutput {
    pub participant_id: String,
    pub tz: TzOffset,
    pub inputs: Vec<ParseReport>,
    pub rmssd: RmssdSeries,
    pub baseline: BaselineSummary,
    /// Absent when no RMSSD point fell in the standardisation scope.
    pub z: Option<StandardizedSeries>,
    pub irf_fit: Option<IrfFit>,
    pub decomposition: EdaDecomposition,
    pub features: Vec<EdaWindowFeatures>,
    pub segments: Vec<WalkingSegment>,
    pub gps_duplicates: usize,
    pub aligned: AlignedSeries,
    pub rmssd_episodes: EpisodeDetection,
    pub scr_episodes: EpisodeDetection,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParticipantFailure {
    pub participant_id: String,
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl ParticipantFailure {
    pub fn new(participant_id: &str, stage: &str, err: &Error) -> Self {
        ParticipantFailure {
            participant_id: participant_id.to_string(),
            stage: stage.to_string(),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

/// Survey results over the roster.
#[derive(Debug, Clone, Default)]
pub struct EsmAnalysis {
    pub inputs: Vec<ParseReport>,
    pub dataset: EsmDataset,
    pub rates: Vec<ResponseRate>,
    pub reports: Vec<InfrastructureReport>,
    pub top_words: Vec<(String, usize)>,
    pub problem_days: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub outputs: Vec<ParticipantOutput>,
    pub failures: Vec<ParticipantFailure>,
    pub esm: EsmAnalysis,
    pub walkability: Option<ParseReport>,
}

/// Files every stage reads, checked without running any analysis.
pub fn validate_inputs(cfg: &PipelineConfig) -> Vec<ParticipantFailure> {
    let mut failures = Vec::new();
    if let Some(w) = &cfg.walkability {
        if let Err(e) = parse_walkability(&cfg.resolve(w)) {
            failures.push(ParticipantFailure::new("*", "walkability", &e));
        }
    }
    if let Some(f) = &cfg.esm_file {
        if let Err(e) = parse_esm(&cfg.resolve(f), &cfg.ingest.esm_bounds) {
            failures.push(ParticipantFailure::new("*", "esm", &e));
        }
    }
    for p in &cfg.participants {
        if let Err((stage, e)) = ingest(cfg, p) {
            failures.push(ParticipantFailure::new(&p.id, stage, &e));
        }
    }
    failures
}

struct Inputs {
    ibi: crate::ingest::IbiSeries,
    eda: EdaSeries,
    gps: crate::ingest::GpsTrack,
    esm: Vec<EsmResponse>,
    reports: Vec<ParseReport>,
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn at<T>(stage: &'static str, r: Result<T>) -> Staged<T> {
    r.map_err(|e| (stage, e))
}

fn ingest(cfg: &PipelineConfig, p: &ParticipantConfig) -> Staged<Inputs> {
    let i = &cfg.ingest;
    let ibi = at("ingest_ibi", parse_ibi(&cfg.resolve(&p.ibi), &p.id, &i.ibi_gate))?;
    let eda = at("ingest_eda", parse_eda(&cfg.resolve(&p.eda), &p.id, &i.eda))?;
    let gps = at("ingest_gps", parse_gps(&cfg.resolve(&p.gps), &p.id))?;
    let mut reports = vec![ibi.report, eda.report, gps.report];
    let mut esm = Vec::new();
    if let Some(path) = &p.esm {
        let parsed = at("ingest_esm", parse_esm(&cfg.resolve(path), &i.esm_bounds))?;
        reports.push(parsed.report);
        let (own, other): (Vec<_>, Vec<_>) = parsed.value.into_iter().partition(|r| r.participant_id == p.id);
        if !other.is_empty() {
            log::warn!("{}: {} survey rows for other participants ignored", p.id, other.len());
        }
        esm = own;
    }
    Ok(Inputs {
        ibi: ibi.value,
        eda: eda.value,
        gps: gps.value,
        esm,
        reports,
    })
}

/// The central `excerpt_s` of the longest gap-free stretch (or all of it
/// when shorter).
fn excerpt(series: &EdaSeries, excerpt_s: f64) -> EdaSeries {
    let longest = series
        .segments()
        .into_iter()
        .max_by_key(|r| r.len())
        .unwrap_or(0..0);
    let n = ((excerpt_s * series.nominal_rate_hz).round() as usize).min(longest.len());
    let start = longest.start + (longest.len() - n) / 2;
    EdaSeries {
        participant_id: series.participant_id.clone(),
        nominal_rate_hz: series.nominal_rate_hz,
        samples: series.samples[start..start + n].to_vec(),
        gaps: Vec::new(),
    }
}

struct Hrv {
    rmssd: RmssdSeries,
    baseline: BaselineSummary,
}

struct Eda {
    fit: Option<IrfFit>,
    decomposition: EdaDecomposition,
    features: Vec<EdaWindowFeatures>,
}

struct Geo {
    segments: Vec<WalkingSegment>,
    points: Vec<crate::geo::ScoredPoint>,
    duplicates: usize,
}

fn run_hrv(cfg: &PipelineConfig, tz: TzOffset, ibi: &crate::ingest::IbiSeries) -> Staged<Hrv> {
    let h = &cfg.hrv;
    let rmssd = at("hrv", rolling_rmssd(ibi, &h.rmssd))?;
    let baseline = sleep_baseline_from(ibi, &rmssd, h.sleep_window, tz, h.min_sleep_coverage_s);
    Ok(Hrv { rmssd, baseline })
}

fn run_eda(cfg: &PipelineConfig, series: &EdaSeries) -> Staged<Eda> {
    let e = &cfg.eda;
    let fit = if e.optimize {
        Some(at("eda_optimize", optimize_irf(&excerpt(series, e.optimize_excerpt_s), &e.search, &e.decompose))?)
    } else {
        None
    };
    let irf = fit.as_ref().map(|f| f.params).unwrap_or(e.irf);
    let decomposition = at("eda", decompose(series, irf, &e.decompose))?;
    let features = at("eda_features", window_features(&decomposition, &e.features))?;
    Ok(Eda {
        fit,
        decomposition,
        features,
    })
}

fn run_geo(cfg: &PipelineConfig, track: &crate::ingest::GpsTrack, cells: &[WalkabilityCell]) -> Geo {
    let g = &cfg.geo;
    let deduped = dedup(track, g.dedup_horizon_ms);
    let duplicates = track.points.len() - deduped.points.len();
    let track = derive_speed(&deduped);
    let segments = walking_segments(&track, g);
    let mut points = spatial_join(&track.points, cells, g.fallback_radius_m);
    tag_segments(&mut points, &segments);
    Geo {
        segments,
        points,
        duplicates,
    }
}

fn process(cfg: &PipelineConfig, p: &ParticipantConfig, inputs: Inputs, cells: &[WalkabilityCell]) -> Staged<ParticipantOutput> {
    let tz = p.tz();
    let (hrv, (eda, geo)) = rayon::join(
        || run_hrv(cfg, tz, &inputs.ibi),
        || rayon::join(|| run_eda(cfg, &inputs.eda), || run_geo(cfg, &inputs.gps, cells)),
    );
    let (hrv, eda, mut geo) = (hrv?, eda?, geo);
    let mut warnings = Vec::new();

    let walking: Vec<_> = geo.segments.iter().map(|s| (s.start, s.end)).collect();
    let z = match standardize(&hrv.rmssd, cfg.hrv.scope, &walking, cfg.hrv.sd) {
        Ok(z) => {
            if z.degenerate {
                warnings.push("zero RMSSD variance; z-scores are 0".to_string());
            }
            attach_z(&mut geo.points, &z, cfg.fuse.align.physio_tolerance_s);
            Some(z)
        }
        Err(e) => {
            warnings.push(format!("no z-scores: {e}"));
            None
        }
    };
    if geo.segments.is_empty() {
        warnings.push("no walking segments".to_string());
    }
    if hrv.baseline.days.is_empty() {
        warnings.push("no night met the sleep-baseline coverage".to_string());
    }

    let aligned = at(
        "fuse",
        align(&p.id, &hrv.rmssd, &eda.features, &geo.segments, &geo.points, &cfg.fuse.align),
    )?;
    let rmssd_episodes = detect_rmssd_episodes(&aligned, tz, &cfg.fuse.episodes);
    let scr_episodes = detect_scr_episodes(&aligned, tz, &cfg.fuse.episodes);
    for d in rmssd_episodes.days.iter().chain(&scr_episodes.days) {
        if d.threshold.is_none() {
            warnings.push(format!("{}: too few points for a daily threshold", d.local_date));
        }
    }
    warnings.dedup();

    Ok(ParticipantOutput {
        participant_id: p.id.clone(),
        tz,
        inputs: inputs.reports,
        rmssd: hrv.rmssd,
        baseline: hrv.baseline,
        z,
        irf_fit: eda.fit,
        decomposition: eda.decomposition,
        features: eda.features,
        segments: geo.segments,
        gps_duplicates: geo.duplicates,
        aligned,
        rmssd_episodes,
        scr_episodes,
        warnings,
    })
}

fn analyse_esm(
    cfg: &PipelineConfig,
    responses: Vec<EsmResponse>,
    inputs: Vec<ParseReport>,
    roster: &[(String, TzOffset)],
) -> Result<EsmAnalysis> {
    let known: BTreeMap<&str, TzOffset> = roster.iter().map(|(id, tz)| (id.as_str(), *tz)).collect();
    let (kept, foreign): (Vec<_>, Vec<_>) = responses
        .into_iter()
        .partition(|r| known.contains_key(r.participant_id.as_str()));
    if !foreign.is_empty() {
        log::warn!("{} survey rows for participants outside the roster ignored", foreign.len());
    }
    let mut dataset = merge_surveys(&kept);
    for (id, _) in roster {
        dataset.participants.entry(id.clone()).or_default();
    }
    let rates = response_rates(&dataset, cfg.study_days)?;
    let neutral = NeutralFilter::new(&cfg.esm.neutral);
    let reports = infrastructure_reports(&dataset, &neutral, &cfg.esm.keyword_map());
    let custom;
    let stopwords = match &cfg.esm.stopwords {
        Some(path) => {
            let path = cfg.resolve(path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("stopwords {}: {e}", path.display())))?;
            custom = parse_word_list(&text);
            &custom
        }
        None => default_stopwords(),
    };
    let texts: Vec<&str> = reports
        .iter()
        .filter(|r| r.category.is_some())
        .map(|r| r.raw_text.as_str())
        .collect();
    let top_words = word_frequencies(&texts, stopwords, cfg.esm.top_n);
    let mut problem_days = BTreeMap::new();
    for (id, tz) in roster {
        let own: Vec<InfrastructureReport> = reports.iter().filter(|r| &r.participant_id == id).cloned().collect();
        problem_days.insert(id.clone(), problem_day_counts(&own, *tz).get(id).copied().unwrap_or(0));
    }
    Ok(EsmAnalysis {
        inputs,
        dataset,
        rates,
        reports,
        top_words,
        problem_days,
    })
}

/// Runs every configured participant on a pool of `jobs` threads (0 = one
/// per core). Errors are reserved for shared inputs; participant problems
/// end up in [`RunOutcome::failures`].
pub fn run(cfg: &PipelineConfig, jobs: usize) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let (cells, walkability) = match &cfg.walkability {
        Some(path) => {
            let parsed = parse_walkability(&cfg.resolve(path))?;
            let mut cells = parsed.value;
            score_cells(&mut cells)?;
            (cells, Some(parsed.report))
        }
        None => (Vec::new(), None),
    };
    let mut esm_inputs = Vec::new();
    let mut shared = Vec::new();
    if let Some(path) = &cfg.esm_file {
        let parsed = parse_esm(&cfg.resolve(path), &cfg.ingest.esm_bounds)?;
        esm_inputs.push(parsed.report);
        shared = parsed.value;
    }

    let results: Vec<Staged<(ParticipantOutput, Vec<EsmResponse>)>> = pool.install(|| {
        cfg.participants
            .par_iter()
            .map(|p| {
                log::info!("{}: processing", p.id);
                let mut inputs = ingest(cfg, p)?;
                let esm = std::mem::take(&mut inputs.esm);
                let out = process(cfg, p, inputs, &cells)?;
                log::info!("{}: done", p.id);
                Ok((out, esm))
            })
            .collect()
    });

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut responses = shared;
    let mut roster = Vec::new();
    for (p, r) in cfg.participants.iter().zip(results) {
        match r {
            Ok((out, esm)) => {
                roster.push((p.id.clone(), p.tz()));
                responses.extend(esm);
                outputs.push(out);
            }
            Err((stage, e)) => {
                log::error!("{}: {stage} failed: {e}", p.id);
                failures.push(ParticipantFailure::new(&p.id, stage, &e));
            }
        }
    }
    let esm = analyse_esm(cfg, responses, esm_inputs, &roster)?;
    Ok(RunOutcome {
        outputs,
        failures,
        esm,
        walkability,
    })
}
