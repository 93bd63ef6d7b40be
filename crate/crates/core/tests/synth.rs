use ambulo::esm::{categorize, infrastructure_reports, merge_surveys, KeywordMap, NeutralFilter};
use ambulo::geo::{dedup, derive_speed, walking_segments, GeoParams};
use ambulo::hrv::{rolling_rmssd, RmssdParams};
use ambulo::ingest::{parse_eda, parse_esm, parse_gps, parse_ibi, EdaOptions, EsmBounds, IbiGate};
use ambulo::synth::*;
use ambulo::time::Timestamp;

fn by_name(name: &str) -> Fixture {
    fixture_suite().unwrap().into_iter().find(|f| f.name == name).unwrap()
}

#[test]
fn suite_shape() {
    let suite = fixture_suite().unwrap();
    assert!(suite.len() >= 8);
    let mut names: Vec<&str> = suite.iter().map(|f| f.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), suite.len());
    let composite = suite.iter().find(|f| f.name == "composite_3h").unwrap();
    let e = &composite.bundle.eda.samples;
    let span = e[e.len() - 1].t.diff_secs(e[0].t);
    assert!((span - 3.0 * 3600.0).abs() <= 1.0, "{span}");
}

#[test]
fn zero_noise_no_impulses_is_pure_tonic() {
    let f = by_name("pure_tonic");
    assert!(f.truth.scr_events.is_empty());
    for (s, tonic) in f.bundle.eda.samples.iter().zip(&f.bundle.eda_tonic) {
        assert_eq!(s.sc_us, *tonic);
    }
    assert!(f.bundle.eda_phasic.iter().all(|&p| p == 0.0));
}

#[test]
fn impulse_bookkeeping() {
    let mut spec = ScenarioSpec {
        duration_s: 600.0,
        ..Default::default()
    };
    spec.eda.impulses = vec![
        Impulse::amplitude(100.0, 0.2),
        Impulse::area(250.0, 0.5),
        Impulse::amplitude(400.0, 0.4),
    ];
    let (bundle, truth) = generate(&spec).unwrap();
    assert_eq!(truth.scr_events.len(), 3);
    assert!((truth.scr_events[0].amplitude_us - 0.2).abs() < 1e-12);
    // Isolated responses peak at the recorded time and height.
    for ev in &truth.scr_events {
        let i = bundle.eda.samples.iter().position(|s| s.t == ev.peak).unwrap();
        let p = &bundle.eda_phasic;
        assert!((p[i] - ev.amplitude_us).abs() < 1e-9);
        assert!(p[i] >= p[i - 1] && p[i] >= p[i + 1]);
        let area: f64 = p[i - 100..i + 200].iter().sum::<f64>() * 0.25;
        assert!((area - ev.area).abs() < 1e-3 * ev.area);
    }
}

#[test]
fn same_seed_same_bytes_and_seed_matters() {
    let render = |seed: u64| {
        let mut spec = by_name("eda_gap_walk").spec;
        spec.seed = seed;
        let (b, t) = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &b, &t).unwrap();
        [IBI_FILE, EDA_FILE, GPS_FILE, ESM_FILE, TRUTH_FILE]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(render(5), render(5));
    assert_ne!(render(5)[1], render(6)[1]);
}

#[test]
fn gap_is_declared() {
    let f = by_name("eda_gap_walk");
    assert_eq!(f.bundle.eda.gaps.len(), 1);
    let g = f.bundle.eda.gaps[0];
    let truth = f.truth.eda_gaps[0];
    assert!(g.start <= truth.start && g.end >= truth.end);
    assert!(truth.start.diff_secs(g.start) <= 0.25 && g.end.diff_secs(truth.end) <= 0.25);
}

#[test]
fn rmssd_dip_hits_target() {
    for name in ["rmssd_dip_walk", "composite_3h"] {
        let f = by_name(name);
        let r = rolling_rmssd(&f.bundle.ibi, &RmssdParams::default()).unwrap();
        let dip = f.truth.low_rmssd[0];
        let target = f.spec.ibi.dips[0].rmssd_ms;
        let base = f.spec.ibi.rmssd_ms;
        let t0 = f.bundle.ibi.samples[0].t;
        for p in &r.points {
            if p.t >= dip.start && p.t <= dip.end {
                assert!((p.rmssd_ms - target).abs() <= 0.15 * target, "{name}: {}", p.rmssd_ms);
            } else if p.t.diff_secs(t0) >= 300.0
                && (p.t.diff_secs(dip.end) > 300.0 || dip.start.diff_secs(p.t) > 300.0)
            {
                assert!((p.rmssd_ms - base).abs() <= 0.15 * base, "{name}: {}", p.rmssd_ms);
            }
        }
    }
}

#[test]
fn gps_speeds_and_walking_truth() {
    for f in fixture_suite().unwrap() {
        let track = derive_speed(&dedup(&f.bundle.gps, 1000));
        assert_eq!(f.bundle.gps.points.len() - track.points.len(), f.truth.gps_duplicates, "{}", f.name);
        // Speeds inside each leg (away from its edges) match the profile.
        for leg in &f.spec.gps.legs {
            for p in &track.points {
                let t = p.t.diff_secs(Timestamp(f.spec.start_ms));
                if t > leg.start_s + f.spec.gps.interval_s && t <= leg.end_s {
                    let v = p.speed_mps.unwrap();
                    assert!((v - leg.speed_mps).abs() <= 0.05 * leg.speed_mps, "{}: {v}", f.name);
                }
            }
        }
        let segs = walking_segments(&track, &GeoParams::default());
        let got: Vec<(Timestamp, Timestamp)> = segs.iter().map(|s| (s.start, s.end)).collect();
        let want: Vec<(Timestamp, Timestamp)> = f.truth.walking.iter().map(|w| (w.start, w.end)).collect();
        assert_eq!(got, want, "{}", f.name);
    }
}

#[test]
fn multi_day_walks_survive_five_minute_sampling() {
    let spec = ScenarioSpec {
        duration_s: 86_400.0,
        ..multi_day_spec("m", 1, 3)
    };
    let mut spec = spec;
    spec.eda.background = None;
    let (bundle, truth) = generate(&spec).unwrap();
    assert_eq!(bundle.gps.points.len(), 288);
    let segs = walking_segments(&derive_speed(&bundle.gps), &GeoParams::default());
    assert_eq!(segs.len(), truth.walking.len());
    assert_eq!(segs.len(), 3);
}

#[test]
fn esm_truth_matches_analysis() {
    let f = by_name("composite_3h");
    let d = merge_surveys(&f.bundle.esm);
    let retained = &d.participants[&f.spec.participant_id];
    for (ty, n) in &f.truth.retained_responses {
        assert_eq!(retained.iter().filter(|r| r.survey_type == *ty).count(), *n);
        assert_eq!(*n, 7);
    }
    assert_eq!(d.excluded.len(), f.truth.excluded_responses);
    let reports = infrastructure_reports(&d, &NeutralFilter::default(), &KeywordMap::default());
    assert_eq!(reports.len(), f.truth.reports.len());
    for (r, t) in reports.iter().zip(&f.truth.reports) {
        assert_eq!(r.t, t.t);
        assert_eq!(r.category, t.category);
        if let Some(c) = t.category {
            assert_eq!(categorize(&t.text, &KeywordMap::default()).category, c);
        }
    }
}

#[test]
fn bundle_files_round_trip_through_ingest() {
    let f = by_name("composite_3h");
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &f.bundle, &f.truth).unwrap();
    let pid = &f.spec.participant_id;
    let ibi = parse_ibi(&dir.path().join(IBI_FILE), pid, &IbiGate::default()).unwrap();
    assert_eq!(ibi.value, f.bundle.ibi);
    assert_eq!(ibi.report.rejected, 0);
    let eda = parse_eda(&dir.path().join(EDA_FILE), pid, &EdaOptions::default()).unwrap();
    assert_eq!(eda.value.samples, f.bundle.eda.samples);
    let gps = parse_gps(&dir.path().join(GPS_FILE), pid).unwrap();
    assert_eq!(gps.value.points, f.bundle.gps.points);
    let esm = parse_esm(&dir.path().join(ESM_FILE), &EsmBounds::default()).unwrap();
    assert_eq!(esm.value.len(), f.bundle.esm.len());
    let truth: GroundTruth = serde_json::from_str(&std::fs::read_to_string(dir.path().join(TRUTH_FILE)).unwrap()).unwrap();
    assert_eq!(truth, f.truth);
}

#[test]
fn walkability_grid_covers_route() {
    let cells = walkability_grid(ambulo::ingest::LatLon::new(39.9526, -75.1652), 3500.0, 10, 7);
    assert_eq!(cells.len(), 100);
    let f = by_name("composite_3h");
    let index = ambulo::geo::CellIndex::new(&cells);
    for p in &f.bundle.gps.points {
        let ll = ambulo::ingest::LatLon::new(p.lat, p.lon);
        assert!(index.locate(ll, 0.0).is_some());
    }
}

#[test]
fn invalid_spec_is_rejected() {
    let mut spec = ScenarioSpec::default();
    spec.ibi.dips.push(RmssdDip {
        start_s: 100.0,
        end_s: 1e7,
        rmssd_ms: 10.0,
    });
    assert!(generate(&spec).is_err());
}
