//! Python bindings: the numeric building blocks on plain lists, plus
//! synthesis and full pipeline runs on config files.

use std::path::PathBuf;

use ambulo::config::PipelineConfig;
use ambulo::eda::{self, DecomposeParams, IrfParams};
use ambulo::esm::{self, KeywordMap};
use ambulo::geo::{self, GeoParams};
use ambulo::hrv::{self, RmssdParams};
use ambulo::ingest::{EdaOptions, EdaSample, EdaSeries, GpsPoint, GpsTrack, IbiSample, IbiSeries};
use ambulo::synth::{fixture_specs, multi_day_spec};
use ambulo::{pipeline, report, stats, Timestamp};
use ambulo_cli::{load_config, synthesize as synth_dir, Overrides, SYNTH_CONFIG};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(ambulo_py, AmbuloError, PyException);

fn err(e: ambulo::Error) -> PyErr {
    AmbuloError::new_err(format!("{}: {e}", e.kind()))
}

fn same_len(a: usize, b: usize, what: &str) -> PyResult<()> {
    if a == b {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("{what}: lengths differ ({a} vs {b})")))
    }
}

fn to_json(py: Python<'_>, v: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| AmbuloError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Rolling RMSSD on a regular grid.
#[pyclass(frozen, get_all, module = "ambulo_py")]
pub struct RmssdSeries {
    /// Window end times, ms since the epoch.
    pub t_ms: Vec<i64>,
    pub rmssd_ms: Vec<f64>,
    pub n_intervals: Vec<usize>,
    pub window_s: f64,
    pub step_s: f64,
}

#[pymethods]
impl RmssdSeries {
    fn __len__(&self) -> usize {
        self.t_ms.len()
    }

    fn __repr__(&self) -> String {
        format!("RmssdSeries(points={}, window_s={}, step_s={})", self.t_ms.len(), self.window_s, self.step_s)
    }
}

#[pyclass(frozen, get_all, module = "ambulo_py")]
pub struct ScrEvent {
    pub onset_ms: i64,
    pub peak_ms: i64,
    pub amplitude_us: f64,
    pub area_us: f64,
    pub significant: bool,
}

#[pymethods]
impl ScrEvent {
    fn __repr__(&self) -> String {
        format!("ScrEvent(peak_ms={}, amplitude_us={:.4})", self.peak_ms, self.amplitude_us)
    }
}

/// Tonic/phasic split of a skin conductance record.
#[pyclass(frozen, get_all, module = "ambulo_py")]
pub struct EdaDecomposition {
    pub t_ms: Vec<i64>,
    pub raw: Vec<f64>,
    pub tonic: Vec<f64>,
    pub phasic: Vec<f64>,
    pub driver: Vec<f64>,
    pub events: Vec<Py<ScrEvent>>,
    pub residual_rms: f64,
    pub noise_sd: f64,
    pub tau1_s: f64,
    pub tau2_s: f64,
}

#[pymethods]
impl EdaDecomposition {
    fn __repr__(&self) -> String {
        format!("EdaDecomposition(samples={}, events={})", self.t_ms.len(), self.events.len())
    }
}

#[pyclass(frozen, get_all, module = "ambulo_py")]
pub struct WalkingSegment {
    pub segment_id: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub n_points: usize,
    pub mean_speed_mps: f64,
}

#[pymethods]
impl WalkingSegment {
    #[getter]
    fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }

    fn __repr__(&self) -> String {
        format!("WalkingSegment({}, {}..{})", self.segment_id, self.start_ms, self.end_ms)
    }
}

/// A parsed pipeline config.
#[pyclass(module = "ambulo_py")]
pub struct Config {
    inner: PipelineConfig,
}

#[pymethods]
impl Config {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let mut inner = PipelineConfig::load(&path).map_err(err)?;
        inner.absolutize().map_err(err)?;
        Ok(Config { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str, base_dir: PathBuf) -> PyResult<Self> {
        Ok(Config { inner: PipelineConfig::from_toml_str(text, base_dir).map_err(err)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(err)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn participants(&self) -> Vec<String> {
        self.inner.participants.iter().map(|p| p.id.clone()).collect()
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_path()
    }

    fn set_step_s(&mut self, step_s: f64) {
        self.inner.set_step_s(step_s);
    }

    fn set_window_s(&mut self, window_s: f64) {
        self.inner.set_window_s(window_s);
    }

    fn __repr__(&self) -> String {
        format!("Config(participants={:?})", self.participants())
    }
}

#[pyfunction]
#[pyo3(signature = (t_ms, ibi_ms, window_s=300.0, step_s=1.0, min_intervals=None))]
fn rolling_rmssd(
    py: Python<'_>,
    t_ms: Vec<i64>,
    ibi_ms: Vec<f64>,
    window_s: f64,
    step_s: f64,
    min_intervals: Option<usize>,
) -> PyResult<RmssdSeries> {
    same_len(t_ms.len(), ibi_ms.len(), "rolling_rmssd")?;
    let mut params = RmssdParams { window_s, step_s, ..RmssdParams::default() };
    if let Some(m) = min_intervals {
        params.min_intervals = m;
    }
    let samples = t_ms.into_iter().zip(ibi_ms).map(|(t, ibi_ms)| IbiSample { t: Timestamp(t), ibi_ms }).collect();
    let series = IbiSeries::new("py", samples);
    let r = py.detach(|| hrv::rolling_rmssd(&series, &params)).map_err(err)?;
    Ok(RmssdSeries {
        t_ms: r.points.iter().map(|p| p.t.0).collect(),
        rmssd_ms: r.points.iter().map(|p| p.rmssd_ms).collect(),
        n_intervals: r.points.iter().map(|p| p.n_intervals).collect(),
        window_s: r.window_s,
        step_s: r.step_s,
    })
}

/// Sampled impulse response normalised to unit area.
#[pyfunction]
#[pyo3(signature = (duration_s, rate_hz, tau1_s=0.7, tau2_s=2.0))]
fn bateman_irf(duration_s: f64, rate_hz: f64, tau1_s: f64, tau2_s: f64) -> PyResult<Vec<f64>> {
    let p = IrfParams { tau1_s, tau2_s };
    eda::bateman_irf(&p, duration_s, rate_hz).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (t_ms, sc_us, rate_hz=4.0, tau1_s=0.7, tau2_s=2.0))]
fn decompose_eda(
    py: Python<'_>,
    t_ms: Vec<i64>,
    sc_us: Vec<f64>,
    rate_hz: f64,
    tau1_s: f64,
    tau2_s: f64,
) -> PyResult<EdaDecomposition> {
    same_len(t_ms.len(), sc_us.len(), "decompose_eda")?;
    let samples = t_ms.into_iter().zip(sc_us).map(|(t, sc_us)| EdaSample { t: Timestamp(t), sc_us }).collect();
    let series = EdaSeries::from_samples("py", rate_hz, samples, EdaOptions::default().gap_factor);
    let irf = IrfParams { tau1_s, tau2_s };
    let d = py
        .detach(|| eda::decompose(&series, irf, &DecomposeParams::default()))
        .map_err(err)?;
    let events = d
        .events
        .iter()
        .map(|e| {
            Py::new(
                py,
                ScrEvent {
                    onset_ms: e.onset.0,
                    peak_ms: e.peak.0,
                    amplitude_us: e.amplitude_us,
                    area_us: e.area_us,
                    significant: e.significant,
                },
            )
        })
        .collect::<PyResult<_>>()?;
    Ok(EdaDecomposition {
        t_ms: d.t.iter().map(|t| t.0).collect(),
        raw: d.raw,
        tonic: d.tonic,
        phasic: d.phasic,
        driver: d.driver,
        events,
        residual_rms: d.residual_rms,
        noise_sd: d.noise_sd,
        tau1_s: d.irf.tau1_s,
        tau2_s: d.irf.tau2_s,
    })
}

#[pyfunction]
fn walkability_from_ranks(w: f64, x: f64, y: f64, z: f64) -> f64 {
    geo::walkability_from_ranks(w, x, y, z)
}

/// Walking segments of a GPS track; `speed_mps` entries may be None.
#[pyfunction]
fn walking_segments(
    t_ms: Vec<i64>,
    lat: Vec<f64>,
    lon: Vec<f64>,
    speed_mps: Vec<Option<f64>>,
) -> PyResult<Vec<WalkingSegment>> {
    same_len(t_ms.len(), lat.len(), "walking_segments")?;
    same_len(t_ms.len(), lon.len(), "walking_segments")?;
    same_len(t_ms.len(), speed_mps.len(), "walking_segments")?;
    let points = (0..t_ms.len())
        .map(|i| GpsPoint { t: Timestamp(t_ms[i]), lat: lat[i], lon: lon[i], speed_mps: speed_mps[i] })
        .collect();
    let params = GeoParams::default();
    let track = geo::dedup(&GpsTrack::new("py", points), params.dedup_horizon_ms);
    Ok(geo::walking_segments(&track, &params)
        .into_iter()
        .map(|s| WalkingSegment {
            segment_id: s.segment_id,
            start_ms: s.start.0,
            end_ms: s.end.0,
            n_points: s.points.len(),
            mean_speed_mps: s.mean_speed_mps,
        })
        .collect())
}

/// Infrastructure category of a free-text report.
#[pyfunction]
fn categorize(text: &str) -> &'static str {
    esm::categorize(text, &KeywordMap::default()).category.as_str()
}

#[pyfunction]
#[pyo3(signature = (texts, top_n=20))]
fn word_frequencies(texts: Vec<String>, top_n: usize) -> Vec<(String, usize)> {
    esm::word_frequencies(&texts, esm::default_stopwords(), top_n)
}

#[pyfunction]
fn percentile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    stats::percentile(&values, p).map_err(err)
}

/// Writes synthetic participant bundles and a config under `out_dir`;
/// returns the config path. Without `days` the built-in fixtures are used,
/// optionally filtered by id.
#[pyfunction]
#[pyo3(signature = (out_dir, participants=None, days=None))]
fn synthesize(py: Python<'_>, out_dir: PathBuf, participants: Option<Vec<String>>, days: Option<u32>) -> PyResult<PathBuf> {
    let mut specs = match days {
        Some(d) => vec![multi_day_spec("p01", d, 1)],
        None => fixture_specs(),
    };
    if let Some(ids) = participants {
        specs.retain(|s| ids.contains(&s.participant_id));
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| AmbuloError::new_err(format!("{}: {e}", out_dir.display())))?;
    py.detach(|| synth_dir(&specs, &out_dir)).map_err(err)?;
    Ok(out_dir.join(SYNTH_CONFIG))
}

/// Runs the pipeline on a config file, writes the output tree and returns
/// the study summary as a dict.
#[pyfunction]
#[pyo3(signature = (config, out=None, jobs=0, participants=None))]
fn run(
    py: Python<'_>,
    config: PathBuf,
    out: Option<PathBuf>,
    jobs: usize,
    participants: Option<Vec<String>>,
) -> PyResult<Py<PyAny>> {
    let o = Overrides { out, jobs, participants: participants.unwrap_or_default(), ..Overrides::default() };
    let built = py
        .detach(|| {
            let cfg = load_config(&config, &o)?;
            let outcome = pipeline::run(&cfg, jobs)?;
            report::write_outputs(&cfg, &outcome)
        })
        .map_err(err)?;
    to_json(py, &built.summary)
}

#[pymodule]
fn ambulo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AmbuloError", m.py().get_type::<AmbuloError>())?;
    m.add_class::<RmssdSeries>()?;
    m.add_class::<ScrEvent>()?;
    m.add_class::<EdaDecomposition>()?;
    m.add_class::<WalkingSegment>()?;
    m.add_class::<Config>()?;
    m.add_function(wrap_pyfunction!(rolling_rmssd, m)?)?;
    m.add_function(wrap_pyfunction!(bateman_irf, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_eda, m)?)?;
    m.add_function(wrap_pyfunction!(walkability_from_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(walking_segments, m)?)?;
    m.add_function(wrap_pyfunction!(categorize, m)?)?;
    m.add_function(wrap_pyfunction!(word_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyDict;

    fn with_module(code: &std::ffi::CStr) {
        Python::initialize();
        Python::attach(|py| {
            let m = pyo3::wrap_pymodule!(ambulo_py)(py);
            let locals = PyDict::new(py);
            locals.set_item("a", m).unwrap();
            if let Err(e) = py.run(code, None, Some(&locals)) {
                e.print(py);
                panic!("python snippet failed");
            }
        });
    }

    #[test]
    fn numeric_functions_round_trip() {
        with_module(
            c"
s = a.rolling_rmssd([i * 1000 for i in range(1, 61)], [800.0 + 10 * (i % 2) for i in range(60)], window_s=30.0)
assert len(s) > 0 and abs(s.rmssd_ms[-1] - 10.0) < 1e-12, s.rmssd_ms
k = a.bateman_irf(20.0, 4.0)
assert k[0] == 0.0 and len(k) == 81
assert a.walkability_from_ranks(3, 3, 6, 6) == 4.0
assert a.categorize('poles in the sidewalk') == 'sidewalk'
assert a.percentile([1.0, 2.0, 3.0, 4.0, 5.0], 50) == 3.0
assert a.word_frequencies(['cracked sidewalk', 'sidewalk'], 1) == [('sidewalk', 2)]
seg = a.walking_segments([i * 60000 for i in range(7)], [40.0] * 7, [-83.0] * 7, [1.2] * 7)
assert len(seg) == 1 and seg[0].duration_s == 360.0
try:
    a.rolling_rmssd([1], [800.0, 900.0])
    raise SystemExit('length mismatch accepted')
except ValueError:
    pass
try:
    a.bateman_irf(20.0, 4.0, tau1_s=3.0)
    raise SystemExit('bad tau accepted')
except a.AmbuloError:
    pass
",
        );
    }

    #[test]
    fn config_parses_and_validates() {
        with_module(
            c"
c = a.Config.from_toml('[[participants]]\\nid = \"x\"\\nibi = \"i\"\\neda = \"e\"\\ngps = \"g\"\\n', '/data')
c.validate()
assert c.participants == ['x']
c.set_step_s(5.0)
assert 'step_s = 5.0' in c.to_toml()
",
        );
    }
}
