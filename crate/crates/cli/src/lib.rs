//! Command implementations behind the `ambulo` binary. Each returns the
//! process exit code: 0 on success, 1 on configuration or usage errors, 2
//! when some participants failed.

use std::path::{Path, PathBuf};

use ambulo::config::{ParticipantConfig, PipelineConfig};
use ambulo::error::{Error, Result};
use ambulo::ingest::{write_walkability, LatLon};
use ambulo::pipeline::{self, ParticipantFailure};
use ambulo::report;
use ambulo::synth::{
    fixture_specs, generate, multi_day_spec, walkability_grid, write_bundle, Route, ScenarioSpec, EDA_FILE,
    ESM_FILE, GPS_FILE, IBI_FILE,
};
use serde::Deserialize;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Command-line adjustments applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub participants: Vec<String>,
    pub step_s: Option<f64>,
    pub window_s: Option<f64>,
}

/// Prints a machine-readable error object on stderr.
pub fn report_error(command: &str, err: &Error) {
    let v = json!({"command": command, "error": err.kind(), "message": err.to_string()});
    eprintln!("{v}");
}

fn report_failures(command: &str, failures: &[ParticipantFailure]) {
    let v = json!({"command": command, "error": "participant_failures", "failures": failures});
    eprintln!("{v}");
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    cfg.absolutize()?;
    if let Some(out) = &o.out {
        cfg.output_dir = std::path::absolute(out).map_err(|e| Error::Config(format!("--out: {e}")))?;
    }
    if let Some(s) = o.step_s {
        cfg.set_step_s(s);
    }
    if let Some(w) = o.window_s {
        cfg.set_window_s(w);
    }
    cfg.retain_participants(&o.participants)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_run(config: &Path, o: &Overrides) -> i32 {
    let cfg = match load_config(config, o) {
        Ok(c) => c,
        Err(e) => {
            report_error("run", &e);
            return EXIT_CONFIG;
        }
    };
    let outcome = match pipeline::run(&cfg, o.jobs) {
        Ok(r) => r,
        Err(e) => {
            report_error("run", &e);
            return EXIT_CONFIG;
        }
    };
    if outcome.outputs.is_empty() {
        report_failures("run", &outcome.failures);
        return EXIT_PARTIAL;
    }
    match report::write_outputs(&cfg, &outcome) {
        Ok(built) if built.summary.failures.is_empty() => EXIT_OK,
        Ok(built) => {
            report_failures("run", &built.summary.failures);
            EXIT_PARTIAL
        }
        Err(e) => {
            report_error("run", &e);
            EXIT_CONFIG
        }
    }
}

pub fn cmd_validate(config: &Path, o: &Overrides) -> i32 {
    let cfg = match load_config(config, o) {
        Ok(c) => c,
        Err(e) => {
            report_error("validate", &e);
            return EXIT_CONFIG;
        }
    };
    let failures = pipeline::validate_inputs(&cfg);
    if failures.is_empty() {
        EXIT_OK
    } else {
        report_failures("validate", &failures);
        EXIT_PARTIAL
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Vec<ScenarioSpec>,
}

/// Scenario specs from a TOML or JSON file holding either one spec or a
/// `scenario` list.
pub fn read_specs(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e == "json");
    let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
    if json {
        if let Ok(f) = serde_json::from_str::<ScenarioFile>(&text) {
            return Ok(f.scenario);
        }
        serde_json::from_str::<ScenarioSpec>(&text)
            .map(|s| vec![s])
            .map_err(|e| bad(e.to_string()))
    } else {
        if let Ok(f) = toml::from_str::<ScenarioFile>(&text) {
            return Ok(f.scenario);
        }
        toml::from_str::<ScenarioSpec>(&text)
            .map(|s| vec![s])
            .map_err(|e| bad(e.to_string()))
    }
}

pub const SYNTH_CONFIG: &str = "config.toml";
pub const SYNTH_WALKABILITY: &str = "walkability.geojson";

/// Generates each scenario into `<out>/<participant>/`, a walkability grid
/// covering the routes, and a config that runs all of them.
pub fn synthesize(specs: &[ScenarioSpec], out: &Path) -> Result<PipelineConfig> {
    if specs.is_empty() {
        return Err(Error::Config("no scenarios to generate".into()));
    }
    let mut cfg = PipelineConfig {
        output_dir: PathBuf::from("results"),
        walkability: Some(PathBuf::from(SYNTH_WALKABILITY)),
        ..PipelineConfig::default()
    };
    let mut study_days = 1;
    for spec in specs {
        let (bundle, truth) = generate(spec)?;
        let dir = out.join(&spec.participant_id);
        write_bundle(&dir, &bundle, &truth)?;
        let rel = |f: &str| PathBuf::from(&spec.participant_id).join(f);
        cfg.participants.push(ParticipantConfig {
            id: spec.participant_id.clone(),
            tz_offset_min: spec.tz_offset_min,
            ibi: rel(IBI_FILE),
            eda: rel(EDA_FILE),
            gps: rel(GPS_FILE),
            esm: Some(rel(ESM_FILE)),
            composite: Vec::new(),
        });
        if let Some(e) = &spec.esm {
            study_days = study_days.max(e.study_days as usize);
        }
    }
    cfg.study_days = study_days;
    let center = match &specs[0].gps.route {
        Route::Circle { center, .. } => *center,
        Route::Waypoints { points } => points.first().copied().unwrap_or(LatLon::new(0.0, 0.0)),
    };
    let cells = walkability_grid(center, 5000.0, 10, 1);
    let geo = out.join(SYNTH_WALKABILITY);
    std::fs::write(&geo, serde_json::to_string_pretty(&write_walkability(&cells))?).map_err(|e| Error::Config(format!("{}: {e}", geo.display())))?;
    let path = out.join(SYNTH_CONFIG);
    std::fs::write(&path, cfg.to_toml()?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.base_dir = out.to_path_buf();
    Ok(cfg)
}

/// Materializes scenarios: from `spec` when given, else the built-in suite,
/// or a `days`-long continuous record.
pub fn cmd_synth(spec: Option<&Path>, out: &Path, days: Option<u32>) -> i32 {
    let specs = match (spec, days) {
        (Some(p), _) => match read_specs(p) {
            Ok(s) => s,
            Err(e) => {
                report_error("synth", &e);
                return EXIT_CONFIG;
            }
        },
        (None, Some(d)) => vec![multi_day_spec("p01", d, 1)],
        (None, None) => fixture_specs(),
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        report_error("synth", &Error::Config(format!("{}: {e}", out.display())));
        return EXIT_CONFIG;
    }
    match synthesize(&specs, out) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            report_error("synth", &e);
            EXIT_CONFIG
        }
    }
}
