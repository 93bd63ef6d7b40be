use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ambulo::config::PipelineConfig;
use ambulo::synth::{fixture_specs, ScenarioSpec, EDA_FILE};
use ambulo_cli::{synthesize, SYNTH_CONFIG};

fn ambulo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ambulo")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn specs(ids: &[&str]) -> Vec<ScenarioSpec> {
    fixture_specs()
        .into_iter()
        .filter(|s| ids.contains(&s.participant_id.as_str()))
        .collect()
}

/// Synthesizes the named fixtures and returns the config path.
fn setup(dir: &Path, ids: &[&str]) -> PathBuf {
    synthesize(&specs(ids), dir).unwrap();
    dir.join(SYNTH_CONFIG)
}

/// The machine-readable error object: the last line on stderr, after any log
/// lines.
fn last_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_writes_full_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["f07", "f10"]);
    let out = dir.path().join("o");
    let o = ambulo(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "effective_config.toml",
        "report/summary.json",
        "report/episodes.csv",
        "report/map.geojson",
        "report/charts/boxplot_stress.svg",
        "report/charts/kde_rmssd.svg",
        "report/charts/categories.svg",
        "report/charts/top_words.svg",
        "report/composite/f10/rmssd.csv",
        "report/composite/f10/walking.csv",
        "report/composite/f10/eda.csv",
        "report/composite/f10/scr_freq.csv",
        "report/composite/f10/events.csv",
        "participants/f07/rmssd.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn corrupt_participant_gives_partial_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["f02", "f03", "f07"]);
    fs::write(dir.path().join("f03").join(EDA_FILE), "time,value\n1,2\n").unwrap();
    let out = dir.path().join("o");
    let o = ambulo(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let err: serde_json::Value = last_json(&o);
    assert_eq!(err["error"], "participant_failures");
    assert_eq!(err["failures"][0]["participant_id"], "f03");
    assert_eq!(err["failures"][0]["stage"], "ingest_eda");

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report/summary.json")).unwrap()).unwrap();
    let ids: Vec<&str> = summary["participants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["participant_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["f02", "f07"]);
    assert!(out.join("report/composite/f02/eda.csv").is_file());
    assert!(!out.join("participants/f03").exists());

    let v = ambulo(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&v), 2);
}

#[test]
fn step_override_changes_rmssd_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["f07"]);
    let out = dir.path().join("o");
    let o = ambulo(&["run", "--config", s(&cfg), "--out", s(&out), "--step-s", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("participants/f07/rmssd.csv")).unwrap();
    let t: Vec<i64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(t.len() > 100);
    assert!(t.windows(2).all(|w| (w[1] - w[0]) % 5000 == 0));
    assert!(t.windows(2).any(|w| w[1] - w[0] == 5000));
    assert!(t.iter().all(|x| x % 5000 == 0));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "output_dir = \"x\"\nno_such_key = 3\n").unwrap();
    let o = ambulo(&["run", "--config", s(&bad)]);
    assert_eq!(code(&o), 1);
    let err: serde_json::Value = last_json(&o);
    assert_eq!(err["error"], "config");
    assert_eq!(code(&ambulo(&["validate", "--config", s(&dir.path().join("missing.toml"))])), 1);

    let cfg = setup(dir.path(), &["f07"]);
    assert_eq!(code(&ambulo(&["run", "--config", s(&cfg), "--participant", "nobody"])), 1);
    assert_eq!(code(&ambulo(&["run", "--config", s(&cfg), "--window-s=-3"])), 1);
    assert_eq!(code(&ambulo(&["validate", "--config", s(&cfg)])), 0);
}

#[test]
fn echo_round_trips_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["f02", "f07"]);
    let out = dir.path().join("o");
    assert_eq!(code(&ambulo(&["run", "--config", s(&cfg), "--out", s(&out), "--jobs", "2"])), 0);
    let first = read_tree(&out);

    let echo = out.join("effective_config.toml");
    let loaded = PipelineConfig::load(&echo).unwrap();
    assert_eq!(loaded.to_toml().unwrap(), fs::read_to_string(&echo).unwrap());

    assert_eq!(code(&ambulo(&["run", "--config", s(&echo), "--jobs", "1"])), 0);
    assert_eq!(read_tree(&out), first);
}

#[test]
fn participant_filter_limits_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &["f02", "f07"]);
    let out = dir.path().join("o");
    let o = ambulo(&["run", "--config", s(&cfg), "--out", s(&out), "--participant", "f07"]);
    assert_eq!(code(&o), 0);
    assert!(out.join("participants/f07").is_dir());
    assert!(!out.join("participants/f02").exists());
}

#[test]
fn synth_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = specs(&["f02"]).remove(0);
    spec.participant_id = "custom".into();
    let path = dir.path().join("spec.toml");
    fs::write(&path, toml::to_string(&spec).unwrap()).unwrap();
    let gen = dir.path().join("g");
    let o = ambulo(&["synth", "--spec", s(&path), "--out", s(&gen)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["custom/ibi.csv", "custom/eda.csv", "custom/gps.csv", "custom/truth.json", "walkability.geojson", "config.toml"] {
        assert!(gen.join(f).is_file(), "{f}");
    }
    let r = ambulo(&["run", "--config", s(&gen.join("config.toml"))]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(gen.join("results/report/summary.json").is_file());

    let json = dir.path().join("spec.json");
    fs::write(&json, "{\"scenario\": [{\"participant_id\": \"a\"}, {\"participant_id\": \"b\", \"seed\": 2}]}").unwrap();
    assert_eq!(code(&ambulo(&["synth", "--spec", s(&json), "--out", s(&dir.path().join("j"))])), 0);
    assert!(dir.path().join("j/b/eda.csv").is_file());

    fs::write(&path, "bogus = 1\n").unwrap();
    assert_eq!(code(&ambulo(&["synth", "--spec", s(&path), "--out", s(&gen)])), 1);
}
