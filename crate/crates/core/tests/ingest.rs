use ambulo::ingest::*;
use ambulo::synth::walkability_grid;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One data line per row; some rows are deliberately bad.
#[derive(Debug, Clone)]
enum Row {
    Good(i64, f64),
    Bad(&'static str),
}

fn ibi_rows() -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec(
        prop_oneof![
            8 => (0i64..10_000_000, 250.0f64..2900.0).prop_map(|(t, v)| Row::Good(t, v)),
            1 => Just(Row::Bad("5,5000")),
            1 => Just(Row::Bad("x,800")),
            1 => Just(Row::Bad("1,2,3")),
        ],
        1..300,
    )
}

fn render(header: &str, rows: &[Row]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        match r {
            Row::Good(t, v) => s.push_str(&format!("{t},{v}\n")),
            Row::Bad(line) => s.push_str(&format!("{line}\n")),
        }
    }
    s
}

fn good(rows: &[Row]) -> bool {
    rows.iter().any(|r| matches!(r, Row::Good(..)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ibi_lossless_sorted_and_round_trips(rows in ibi_rows(), seed in any::<u64>()) {
        prop_assume!(good(&rows));
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = parse_ibi_reader(render("t_utc_ms,ibi_ms", &rows).as_bytes(), "p", &IbiGate::default(), "a").unwrap();
        let b = parse_ibi_reader(render("t_utc_ms,ibi_ms", &shuffled).as_bytes(), "p", &IbiGate::default(), "b").unwrap();
        prop_assert_eq!(a.report.input_rows, rows.len());
        prop_assert_eq!(a.report.accepted + a.report.rejected, rows.len());
        prop_assert_eq!(a.report.accepted, a.value.len());
        prop_assert!(a.value.samples.windows(2).all(|w| w[0].t < w[1].t));

        // Same timestamps in any order; values may differ only where a
        // timestamp was duplicated and a different copy survived.
        let ta: Vec<_> = a.value.samples.iter().map(|s| s.t).collect();
        let tb: Vec<_> = b.value.samples.iter().map(|s| s.t).collect();
        prop_assert_eq!(ta, tb);

        let mut buf = Vec::new();
        write_ibi(&a.value, &mut buf).unwrap();
        let again = parse_ibi_reader(buf.as_slice(), "p", &IbiGate::default(), "c").unwrap();
        prop_assert_eq!(again.value, a.value);
    }

    #[test]
    fn eda_lossless_sorted_and_round_trips(rows in prop::collection::vec(
        prop_oneof![
            6 => (0i64..1_000_000, 0.0f64..40.0).prop_map(|(t, v)| Row::Good(t, v)),
            1 => Just(Row::Bad("10,-0.1")),
            1 => Just(Row::Bad("10,NaN")),
        ], 1..300), seed in any::<u64>()) {
        prop_assume!(good(&rows));
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let p = parse_eda_reader(render("t_utc_ms,sc_us", &shuffled).as_bytes(), "p", &EdaOptions::default(), "a").unwrap();
        prop_assert_eq!(p.report.accepted + p.report.rejected, rows.len());
        prop_assert!(p.value.samples.windows(2).all(|w| w[0].t < w[1].t));
        let mut buf = Vec::new();
        write_eda(&p.value, &mut buf).unwrap();
        let again = parse_eda_reader(buf.as_slice(), "p", &EdaOptions::default(), "c").unwrap();
        prop_assert_eq!(again.value, p.value);
    }

    #[test]
    fn gps_lossless_sorted_and_round_trips(
        pts in prop::collection::vec((0i64..1_000_000, -95.0f64..95.0, -180.0f64..180.0, prop::option::of(0.0f64..5.0)), 1..200),
        seed in any::<u64>(),
    ) {
        let in_range = pts.iter().filter(|p| (-90.0..=90.0).contains(&p.1)).count();
        prop_assume!(in_range > 0);
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut text = String::from("t_utc_ms,lat,lon,speed_mps\n");
        for (t, lat, lon, v) in &shuffled {
            let v = v.map(|v| v.to_string()).unwrap_or_default();
            text.push_str(&format!("{t},{lat},{lon},{v}\n"));
        }
        let p = parse_gps_reader(text.as_bytes(), "p", "a").unwrap();
        prop_assert_eq!(p.report.input_rows, pts.len());
        prop_assert_eq!(p.report.accepted, in_range);
        prop_assert_eq!(p.report.rejected_for("coordinate_out_of_range"), pts.len() - in_range);
        prop_assert!(p.value.points.windows(2).all(|w| w[0].t <= w[1].t));
        let mut buf = Vec::new();
        write_gps(&p.value, &mut buf).unwrap();
        let again = parse_gps_reader(buf.as_slice(), "p", "c").unwrap();
        prop_assert_eq!(again.value, p.value);
    }
}

#[test]
fn gps_duplicates_survive_parsing() {
    let text = "t_utc_ms,lat,lon,speed_mps\n1000,40,-83,1.2\n1000,40,-83,1.2\n1000,40.00001,-83,\n2000,40,-83,1.0\n";
    let p = parse_gps_reader(text.as_bytes(), "p", "t").unwrap();
    assert_eq!(p.value.points.len(), 4);
}

#[test]
fn esm_four_by_fourteen_by_four() {
    let mut text = ESM_HEADER_LINE.to_string();
    let day_ms = 86_400_000i64;
    for pid in ["p04", "p02", "p03", "p01"] {
        for d in 0..14 {
            for (k, ty) in SurveyType::ALL.iter().enumerate() {
                let t = 1_709_510_400_000 + d * day_ms + (k as i64 + 1) * 4 * 3_600_000;
                let row = match ty {
                    SurveyType::Morning => format!("{pid},morning,{t},3,1,2,4,,,"),
                    SurveyType::EndOfDay => format!("{pid},end_of_day,{t},3,1,2,,yes,25,broken sidewalk"),
                    _ => format!("{pid},{ty},{t},5,0,3,,,,"),
                };
                text.push_str(&row);
                text.push('\n');
            }
        }
    }
    let p = parse_esm_reader(text.as_bytes(), &EsmBounds::default(), "fixture").unwrap();
    assert_eq!(p.value.len(), 224);
    assert_eq!(p.report.accepted, 224);
    assert!(p.report.warnings.is_empty());
    let pids: Vec<&str> = p.value.iter().map(|r| r.participant_id.as_str()).collect();
    let mut sorted = pids.clone();
    sorted.sort();
    assert_eq!(pids, sorted);
    for pid in ["p01", "p02", "p03", "p04"] {
        let mine: Vec<_> = p.value.iter().filter(|r| r.participant_id == pid).collect();
        assert_eq!(mine.len(), 56);
        assert!(mine.windows(2).all(|w| w[0].t < w[1].t));
    }
}

const ESM_HEADER_LINE: &str =
    "participant_id,survey_type,t_utc_ms,stress,valence,arousal,sleep_quality,walked_today,walk_minutes,infra_text\n";

#[test]
fn esm_round_trip() {
    let text = format!(
        "{ESM_HEADER_LINE}p1,end_of_day,5000,4,-1,2,,no,0,\"cars park on the sidewalk, again\"\np1,morning,1000,,,,5,,,\n"
    );
    let p = parse_esm_reader(text.as_bytes(), &EsmBounds::default(), "t").unwrap();
    let mut buf = Vec::new();
    write_esm(&p.value, &mut buf).unwrap();
    let again = parse_esm_reader(buf.as_slice(), &EsmBounds::default(), "u").unwrap();
    assert_eq!(again.value, p.value);
}

#[test]
fn ten_feature_walkability_fixture() {
    let cells: Vec<_> = walkability_grid(LatLon::new(39.96, -83.0), 1000.0, 4, 3)
        .into_iter()
        .take(10)
        .collect();
    let text = write_walkability(&cells).to_string();
    let p = parse_walkability_str(&text, "grid").unwrap();
    assert_eq!(p.value.len(), 10);
    assert_eq!(p.report.rejected, 0);
    for c in &p.value {
        let CellGeometry::Polygon(rings) = &c.geometry else {
            panic!("expected polygon");
        };
        for ring in rings {
            assert!(ring.len() >= 4);
            assert_eq!(ring.first(), ring.last());
        }
    }
}
