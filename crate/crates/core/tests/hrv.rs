use ambulo::hrv::*;
use ambulo::ingest::{IbiSample, IbiSeries};
use ambulo::stats::{Bandwidth, SdKind};
use ambulo::time::{Timestamp, TzOffset};
use chrono::NaiveTime;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn series(beats: &[(i64, f64)]) -> IbiSeries {
    IbiSeries::new(
        "p",
        beats
            .iter()
            .map(|&(t, ibi_ms)| IbiSample { t: Timestamp(t), ibi_ms })
            .collect(),
    )
}

/// Beats with random intervals, each timestamped at the end of its interval.
fn random_stream(rng: &mut ChaCha8Rng, start_ms: i64, n: usize) -> IbiSeries {
    let mut t = start_ms;
    let mut beats = Vec::with_capacity(n);
    for _ in 0..n {
        let ibi: f64 = rng.random_range(500.0..1200.0);
        t += ibi.round() as i64;
        beats.push((t, ibi));
    }
    series(&beats)
}

/// Direct per-window evaluation over the same grid.
fn brute_force(s: &IbiSeries, p: &RmssdParams) -> Vec<(i64, f64, usize)> {
    let b = &s.samples;
    let (w, step) = ((p.window_s * 1000.0) as i64, (p.step_s * 1000.0) as i64);
    let ceil = |t: i64| t.div_euclid(step) * step + if t.rem_euclid(step) == 0 { 0 } else { step };
    let mut out = Vec::new();
    let mut t = ceil(b[0].t.0);
    while t <= ceil(b[b.len() - 1].t.0) {
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..b.len() - 1 {
            let inside = |k: usize| b[k].t.0 > t - w && b[k].t.0 <= t;
            if inside(i) && inside(i + 1) {
                let d = b[i + 1].ibi_ms - b[i].ibi_ms;
                sum += d * d;
                n += 1;
            }
        }
        if n >= p.min_intervals.max(1) {
            out.push((t, (sum / n as f64).sqrt(), n));
        }
        t += step;
    }
    out
}

fn assert_matches_oracle(s: &IbiSeries, p: &RmssdParams) {
    let got = rolling_rmssd(s, p).unwrap();
    let want = brute_force(s, p);
    assert_eq!(got.points.len(), want.len());
    for (g, (t, r, n)) in got.points.iter().zip(want) {
        assert_eq!(g.t.0, t);
        assert_eq!(g.n_intervals, n);
        assert!((g.rmssd_ms - r).abs() <= 1e-9 * r.max(1e-12), "{} vs {r}", g.rmssd_ms);
    }
}

#[test]
fn ten_minute_streams_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let s = random_stream(&mut rng, 1_000_000 + k * 137, 700);
        assert_matches_oracle(&s, &RmssdParams::default());
        assert_matches_oracle(
            &s,
            &RmssdParams {
                window_s: 60.0,
                step_s: 5.0,
                min_intervals: 3,
            },
        );
    }
}

#[test]
fn hand_example() {
    let s = series(&[(1000, 800.0), (1810, 810.0), (2600, 790.0)]);
    let p = RmssdParams {
        min_intervals: 2,
        ..Default::default()
    };
    let r = rolling_rmssd(&s, &p).unwrap();
    assert!((r.points[0].rmssd_ms - 250f64.sqrt()).abs() < 1e-12);
}

#[test]
fn gap_in_beats_leaves_a_hole() {
    let mut beats: Vec<(i64, f64)> = (1..=400).map(|i| (i * 800, 800.0 + (i % 3) as f64)).collect();
    let resume = 400 * 800 + 900_000;
    beats.extend((1..=400).map(|i| (resume + i * 800, 800.0 + (i % 5) as f64)));
    let s = series(&beats);
    let r = rolling_rmssd(&s, &RmssdParams::default()).unwrap();
    let gaps = r.points.windows(2).filter(|w| w[1].t.0 - w[0].t.0 > 1000).count();
    assert_eq!(gaps, 1);
    assert_matches_oracle(&s, &RmssdParams::default());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_invariant_and_scale_linear(seed in 0u64..1000, c in -300.0f64..300.0, k in 0.2f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_stream(&mut rng, 0, 500);
        let p = RmssdParams::default();
        let base = rolling_rmssd(&s, &p).unwrap();
        let mut shifted = s.clone();
        let mut scaled = s.clone();
        for b in &mut shifted.samples { b.ibi_ms += c; }
        for b in &mut scaled.samples { b.ibi_ms *= k; }
        let sh = rolling_rmssd(&shifted, &p).unwrap();
        let sc = rolling_rmssd(&scaled, &p).unwrap();
        for ((a, b), d) in base.points.iter().zip(&sh.points).zip(&sc.points) {
            // Shifting changes no successive difference; rounding of the
            // shifted values themselves is the only source of change.
            prop_assert!((a.rmssd_ms - b.rmssd_ms).abs() <= 1e-9 * a.rmssd_ms.max(1.0));
            prop_assert!((a.rmssd_ms * k - d.rmssd_ms).abs() <= 1e-9 * d.rmssd_ms.max(1e-12));
        }
    }

    #[test]
    fn standardized_moments(values in prop::collection::vec(1.0f64..200.0, 2..200)) {
        let s = RmssdSeries {
            participant_id: "p".into(),
            points: values.iter().enumerate().map(|(i, &v)| RmssdPoint {
                t: Timestamp(i as i64 * 1000),
                rmssd_ms: v,
                n_intervals: 10,
            }).collect(),
            window_s: 300.0,
            step_s: 1.0,
        };
        let z = standardize(&s, StandardizeScope::PerParticipantAll, &[], SdKind::Sample).unwrap();
        if !z.degenerate {
            let n = z.points.len() as f64;
            let mean = z.points.iter().map(|p| p.z).sum::<f64>() / n;
            let sd = (z.points.iter().map(|p| (p.z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn two_point_standardization() {
    let s = RmssdSeries {
        participant_id: "p".into(),
        points: [100.0, 300.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| RmssdPoint {
                t: Timestamp(i as i64),
                rmssd_ms: v,
                n_intervals: 10,
            })
            .collect(),
        window_s: 300.0,
        step_s: 1.0,
    };
    let sample = standardize(&s, StandardizeScope::PerParticipantAll, &[], SdKind::Sample).unwrap();
    assert!((sample.points[1].z - 0.5f64.sqrt()).abs() < 1e-12);
    let pop = standardize(&s, StandardizeScope::PerParticipantAll, &[], SdKind::Population).unwrap();
    assert_eq!(pop.points[0].z, -1.0);
}

#[test]
fn synthetic_night_baseline_equals_plateau() {
    // 2024-03-04 00:00 at UTC−5, then a night whose RMSSD sits on a plateau:
    // alternating ±a gives successive differences of exactly 2a.
    let tz = TzOffset(-300);
    let start = 1_709_528_400_000;
    let a = 20.0;
    let mut beats = Vec::new();
    let mut t = start;
    for i in 0..(8 * 3600) {
        let ibi = 1000.0 + if i % 2 == 0 { a } else { -a };
        t += ibi as i64;
        beats.push((t, ibi));
    }
    let s = series(&beats);
    let b = sleep_baseline(&s, &RmssdParams::default(), SleepWindow::default(), tz).unwrap();
    assert_eq!(b.days.len(), 1);
    assert_eq!(b.days[0].date.to_string(), "2024-03-04");
    assert!((b.days[0].rmssd_ms - 2.0 * a).abs() < 1e-9);
    assert!(b.days[0].coverage_s >= 1800.0);

    // A window the beats never reach gives nothing.
    let late = SleepWindow {
        start: NaiveTime::from_hms_opt(20, 0, 0).unwrap(),
        end: NaiveTime::from_hms_opt(23, 0, 0).unwrap(),
    };
    assert!(sleep_baseline(&s, &RmssdParams::default(), late, tz).unwrap().days.is_empty());
}

#[test]
fn summary_of_symmetric_set() {
    let d = summarize_distribution(&[1.0, 2.0, 3.0, 4.0, 5.0], Bandwidth::Silverman).unwrap();
    assert_eq!((d.five_number.q1, d.five_number.median, d.five_number.q3), (2.0, 3.0, 4.0));
    let k = d.kde.unwrap();
    assert_eq!(k.x.len(), 256);
    assert!((k.trapezoid_area() - 1.0).abs() < 1e-3);
    assert!(summarize_distribution(&[1.0], Bandwidth::Silverman).unwrap().kde.is_none());
}
