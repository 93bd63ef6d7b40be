//! Pipeline configuration: participant roster, input paths and every module
//! parameter, read from one TOML file. Missing keys take the module defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eda::{DecomposeParams, FeatureParams, IrfParams, SearchBox};
use crate::error::{Error, Result};
use crate::esm::{Category, KeywordMap, DEFAULT_NEUTRAL};
use crate::fuse::{AlignParams, EpisodeParams};
use crate::geo::GeoParams;
use crate::hrv::{RmssdParams, SleepWindow, StandardizeScope, DEFAULT_MIN_SLEEP_COVERAGE_S};
use crate::ingest::{EdaOptions, EsmBounds, IbiGate};
use crate::stats::{Bandwidth, SdKind};
use crate::time::{Timestamp, TzOffset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub study_days: usize,
    /// Walkability cells (GeoJSON), shared by all participants.
    pub walkability: Option<PathBuf>,
    /// Survey responses for the whole roster in one file. Participants may
    /// also list their own file.
    pub esm_file: Option<PathBuf>,
    pub participants: Vec<ParticipantConfig>,
    pub ingest: IngestConfig,
    pub hrv: HrvConfig,
    pub eda: EdaConfig,
    pub geo: GeoParams,
    pub fuse: FuseConfig,
    pub esm: EsmConfig,
    pub report: ReportConfig,
    /// Directory relative paths are resolved against; the config file's own
    /// directory when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_dir: PathBuf::from("out"),
            study_days: 14,
            walkability: None,
            esm_file: None,
            participants: Vec::new(),
            ingest: IngestConfig::default(),
            hrv: HrvConfig::default(),
            eda: EdaConfig::default(),
            geo: GeoParams::default(),
            fuse: FuseConfig::default(),
            esm: EsmConfig::default(),
            report: ReportConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantConfig {
    pub id: String,
    /// Minutes east of UTC.
    #[serde(default)]
    pub tz_offset_min: i32,
    pub ibi: PathBuf,
    pub eda: PathBuf,
    pub gps: PathBuf,
    #[serde(default)]
    pub esm: Option<PathBuf>,
    /// Windows to export as composite panels. When empty one window is
    /// chosen automatically.
    #[serde(default)]
    pub composite: Vec<WindowConfig>,
}

impl ParticipantConfig {
    pub fn tz(&self) -> TzOffset {
        TzOffset(self.tz_offset_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl WindowConfig {
    pub fn bounds(&self) -> (Timestamp, Timestamp) {
        (Timestamp(self.start_ms), Timestamp(self.end_ms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub ibi_gate: IbiGate,
    pub eda: EdaOptions,
    pub esm_bounds: EsmBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrvConfig {
    pub rmssd: RmssdParams,
    pub sleep_window: SleepWindow,
    pub min_sleep_coverage_s: f64,
    pub scope: StandardizeScope,
    pub sd: SdKind,
    pub bandwidth: Bandwidth,
}

impl Default for HrvConfig {
    fn default() -> Self {
        HrvConfig {
            rmssd: RmssdParams::default(),
            sleep_window: SleepWindow::default(),
            min_sleep_coverage_s: DEFAULT_MIN_SLEEP_COVERAGE_S,
            scope: StandardizeScope::default(),
            sd: SdKind::default(),
            bandwidth: Bandwidth::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaConfig {
    pub irf: IrfParams,
    /// Fit the time constants per participant instead of using `irf`.
    pub optimize: bool,
    /// Length of the excerpt the fit runs on, seconds.
    pub optimize_excerpt_s: f64,
    pub search: SearchBox,
    pub decompose: DecomposeParams,
    pub features: FeatureParams,
}

impl Default for EdaConfig {
    fn default() -> Self {
        EdaConfig {
            irf: IrfParams::default(),
            optimize: false,
            optimize_excerpt_s: 600.0,
            search: SearchBox::default(),
            decompose: DecomposeParams::default(),
            features: FeatureParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    pub align: AlignParams,
    pub episodes: EpisodeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordEntry {
    pub category: Category,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsmConfig {
    /// Categories in priority order.
    pub keywords: Vec<KeywordEntry>,
    pub neutral: Vec<String>,
    /// Replacement stopword list, one word per line.
    pub stopwords: Option<PathBuf>,
    pub top_n: usize,
}

impl Default for EsmConfig {
    fn default() -> Self {
        EsmConfig {
            keywords: KeywordMap::default()
                .0
                .into_iter()
                .map(|(category, words)| KeywordEntry { category, words })
                .collect(),
            neutral: DEFAULT_NEUTRAL.iter().map(|s| s.to_string()).collect(),
            stopwords: None,
            top_n: 20,
        }
    }
}

impl EsmConfig {
    pub fn keyword_map(&self) -> KeywordMap {
        KeywordMap(
            self.keywords
                .iter()
                .map(|e| (e.category, e.words.clone()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Length of the automatically chosen composite window, seconds.
    pub composite_window_s: f64,
    /// Also write per-participant intermediate tables.
    pub participant_tables: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            composite_window_s: 3.0 * 3600.0,
            participant_tables: true,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} must be non-negative, got {v}")))
    }
}

fn percentile(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 100.0 {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} must lie strictly between 0 and 100, got {p}")))
    }
}

fn ordered<T: PartialOrd + std::fmt::Debug>(name: &str, (lo, hi): (T, T)) -> Result<()> {
    if lo < hi {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} needs low < high, got ({lo:?}, {hi:?})")))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    /// Reads and parses the file. Validation is separate so command-line
    /// overrides can be applied first.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Rewrites every path as an absolute one, so the serialized config no
    /// longer depends on where it is stored.
    pub fn absolutize(&mut self) -> Result<()> {
        let base = std::path::absolute(&self.base_dir).map_err(|e| cfg_err(format!("{}: {e}", self.base_dir.display())))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.walkability.iter_mut().for_each(fix);
        self.esm_file.iter_mut().for_each(fix);
        self.esm.stopwords.iter_mut().for_each(fix);
        for p in &mut self.participants {
            fix(&mut p.ibi);
            fix(&mut p.eda);
            fix(&mut p.gps);
            p.esm.iter_mut().for_each(fix);
        }
        self.base_dir = base;
        Ok(())
    }

    /// Sets the step of every rolling series and of the alignment grid.
    pub fn set_step_s(&mut self, step_s: f64) {
        self.hrv.rmssd.step_s = step_s;
        self.eda.features.step_s = step_s;
        self.fuse.align.step_s = step_s;
    }

    /// Sets the window of both rolling feature series.
    pub fn set_window_s(&mut self, window_s: f64) {
        self.hrv.rmssd.window_s = window_s;
        self.eda.features.window_s = window_s;
    }

    /// Keeps only the listed participants; unknown ids are an error.
    pub fn retain_participants(&mut self, ids: &[String]) -> Result<()> {
        if ids.is_empty() {
            return Ok(());
        }
        for id in ids {
            if !self.participants.iter().any(|p| &p.id == id) {
                return Err(cfg_err(format!("participant {id} is not in the roster")));
            }
        }
        self.participants.retain(|p| ids.contains(&p.id));
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.participants.is_empty() {
            return Err(cfg_err("no participants configured"));
        }
        let mut seen = BTreeSet::new();
        for p in &self.participants {
            let safe = !p.id.is_empty()
                && p.id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
                && p.id != "."
                && p.id != "..";
            if !safe {
                return Err(cfg_err(format!(
                    "participant id {:?} must be non-empty ASCII letters, digits, '-', '_' or '.'",
                    p.id
                )));
            }
            if !seen.insert(&p.id) {
                return Err(cfg_err(format!("duplicate participant id {}", p.id)));
            }
            if p.tz_offset_min.abs() > 18 * 60 {
                return Err(cfg_err(format!("{}: tz_offset_min {} out of range", p.id, p.tz_offset_min)));
            }
            for w in &p.composite {
                if w.end_ms <= w.start_ms {
                    return Err(cfg_err(format!("{}: empty composite window", p.id)));
                }
            }
        }
        if self.study_days == 0 {
            return Err(cfg_err("study_days must be at least 1"));
        }

        let i = &self.ingest;
        ordered("ingest.ibi_gate", (i.ibi_gate.min_ms, i.ibi_gate.max_ms))?;
        non_negative("ingest.ibi_gate.min_ms", i.ibi_gate.min_ms)?;
        positive("ingest.eda.nominal_rate_hz", i.eda.nominal_rate_hz)?;
        if !(i.eda.gap_factor > 1.0) {
            return Err(cfg_err("ingest.eda.gap_factor must exceed 1"));
        }
        non_negative("ingest.eda.rate_tolerance", i.eda.rate_tolerance)?;
        let b = &i.esm_bounds;
        for (name, r) in [
            ("stress", b.stress),
            ("valence", b.valence),
            ("arousal", b.arousal),
            ("sleep_quality", b.sleep_quality),
        ] {
            ordered(&format!("ingest.esm_bounds.{name}"), r)?;
        }

        let h = &self.hrv;
        positive("hrv.rmssd.window_s", h.rmssd.window_s)?;
        positive("hrv.rmssd.step_s", h.rmssd.step_s)?;
        if h.rmssd.step_s > h.rmssd.window_s {
            return Err(cfg_err("hrv.rmssd.step_s exceeds the window"));
        }
        if h.rmssd.min_intervals == 0 {
            return Err(cfg_err("hrv.rmssd.min_intervals must be at least 1"));
        }
        if h.sleep_window.start == h.sleep_window.end {
            return Err(cfg_err("hrv.sleep_window is empty"));
        }
        non_negative("hrv.min_sleep_coverage_s", h.min_sleep_coverage_s)?;
        if let Bandwidth::Fixed(bw) = h.bandwidth {
            positive("hrv.bandwidth", bw)?;
        }

        let e = &self.eda;
        e.irf.validate().map_err(|err| cfg_err(format!("eda.irf: {err}")))?;
        e.search.validate().map_err(|err| cfg_err(format!("eda.search: {err}")))?;
        positive("eda.optimize_excerpt_s", e.optimize_excerpt_s)?;
        let d = &e.decompose;
        non_negative("eda.decompose.solver.lambda", d.solver.lambda)?;
        positive("eda.decompose.solver.rel_tol", d.solver.rel_tol)?;
        if d.solver.max_iter == 0 {
            return Err(cfg_err("eda.decompose.solver.max_iter must be at least 1"));
        }
        positive("eda.decompose.solver.block_s", d.solver.block_s)?;
        non_negative("eda.decompose.solver.lookahead_s", d.solver.lookahead_s)?;
        positive("eda.decompose.tonic.smooth_s", d.tonic.smooth_s)?;
        positive("eda.decompose.tonic.minima_window_s", d.tonic.minima_window_s)?;
        positive("eda.decompose.tonic.average_s", d.tonic.average_s)?;
        non_negative("eda.decompose.min_segment_s", d.min_segment_s)?;
        non_negative("eda.decompose.region_eps", d.region_eps)?;
        non_negative("eda.decompose.amp_threshold", d.amp_threshold)?;
        positive("eda.features.window_s", e.features.window_s)?;
        positive("eda.features.step_s", e.features.step_s)?;

        let g = &self.geo;
        non_negative("geo.v_min_mps", g.v_min_mps)?;
        ordered("geo speed band", (g.v_min_mps, g.v_max_mps))?;
        non_negative("geo.min_duration_s", g.min_duration_s)?;
        positive("geo.max_gap_s", g.max_gap_s)?;
        non_negative("geo.fallback_radius_m", g.fallback_radius_m)?;
        if g.dedup_horizon_ms < 0 {
            return Err(cfg_err("geo.dedup_horizon_ms must be non-negative"));
        }

        let f = &self.fuse;
        positive("fuse.align.step_s", f.align.step_s)?;
        non_negative("fuse.align.physio_tolerance_s", f.align.physio_tolerance_s)?;
        non_negative("fuse.align.location_tolerance_s", f.align.location_tolerance_s)?;
        percentile("fuse.episodes.rmssd_percentile", f.episodes.rmssd_percentile)?;
        percentile("fuse.episodes.scr_percentile", f.episodes.scr_percentile)?;
        non_negative("fuse.episodes.min_episode_s", f.episodes.min_episode_s)?;

        let s = &self.esm;
        if s.top_n == 0 {
            return Err(cfg_err("esm.top_n must be at least 1"));
        }
        let mut cats = BTreeSet::new();
        for k in &s.keywords {
            if k.category == Category::Other {
                return Err(cfg_err("esm.keywords: 'other' is the fallback and takes no keywords"));
            }
            if !cats.insert(k.category) {
                return Err(cfg_err(format!("esm.keywords: {} listed twice", k.category.as_str())));
            }
            if k.words.iter().any(|w| w.trim().is_empty()) {
                return Err(cfg_err(format!("esm.keywords: empty keyword for {}", k.category.as_str())));
            }
        }

        positive("report.composite_window_s", self.report.composite_window_s)?;
        Ok(())
    }
}
