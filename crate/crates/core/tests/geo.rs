use ambulo::geo::{
    dedup, derive_speed, haversine_m, point_in_rings, scored_points_geojson, spatial_join, tag_segments,
    walkability_from_ranks, walkability_score, walking_segments, write_segments_csv, GeoParams,
};
use ambulo::ingest::{CellGeometry, GpsPoint, GpsTrack, LatLon, WalkabilityCell};
use ambulo::Timestamp;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(t: i64, speed: Option<f64>) -> GpsPoint {
    GpsPoint {
        t: Timestamp(t),
        lat: 39.95,
        lon: -75.16,
        speed_mps: speed,
    }
}

fn bursty_track(rng: &mut ChaCha8Rng) -> GpsTrack {
    let mut t = 0i64;
    let mut pts = Vec::new();
    for _ in 0..rng.random_range(1..80) {
        t += if rng.random_bool(0.4) {
            rng.random_range(0..1500)
        } else {
            rng.random_range(1000..400_000)
        };
        pts.push(pt(t, None));
    }
    GpsTrack::new("p", pts)
}

/// Cluster scan: split wherever a successive difference reaches the horizon.
fn dedup_oracle(track: &GpsTrack, h: i64) -> Vec<i64> {
    let mut clusters: Vec<Vec<i64>> = Vec::new();
    for p in &track.points {
        match clusters.last_mut() {
            Some(c) if p.t.0 - *c.last().unwrap() < h => c.push(p.t.0),
            _ => clusters.push(vec![p.t.0]),
        }
    }
    clusters.iter().map(|c| c[0]).collect()
}

#[test]
fn dedup_matches_oracle_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let track = bursty_track(&mut rng);
        let once = dedup(&track, 1000);
        let ts: Vec<i64> = once.points.iter().map(|p| p.t.0).collect();
        assert_eq!(ts, dedup_oracle(&track, 1000));
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(dedup(&once, 1000), once);
    }
}

#[test]
fn sparse_track_is_unchanged_by_dedup() {
    let track = GpsTrack::new("p", (0..50).map(|i| pt(i * 300_000, Some(1.0))).collect());
    assert_eq!(dedup(&track, 1000), track);
}

/// All maximal valid runs, by exhaustive search over (i, j) pairs.
fn segments_oracle(track: &GpsTrack, p: &GeoParams) -> Vec<(i64, i64, usize)> {
    let pts = &track.points;
    let ok = |k: usize| pts[k].speed_mps.is_some_and(|v| v >= p.v_min_mps && v <= p.v_max_mps);
    let link = |k: usize| (pts[k].t.0 - pts[k - 1].t.0) as f64 <= p.max_gap_s * 1000.0;
    let valid = |i: usize, j: usize| (i..=j).all(ok) && (i + 1..=j).all(link);
    let mut out = Vec::new();
    for i in 0..pts.len() {
        for j in i..pts.len() {
            if !valid(i, j) {
                continue;
            }
            let left_max = i == 0 || !valid(i - 1, j);
            let right_max = j + 1 == pts.len() || !valid(i, j + 1);
            let span = (pts[j].t.0 - pts[i].t.0) as f64 / 1000.0;
            if left_max && right_max && span >= p.min_duration_s {
                out.push((pts[i].t.0, pts[j].t.0, j - i + 1));
            }
        }
    }
    out
}

#[test]
fn segmentation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = GeoParams::default();
    for _ in 0..500 {
        let mut t = 0;
        let pts: Vec<GpsPoint> = (0..rng.random_range(0..40))
            .map(|_| {
                t += *[60_000, 300_000, 300_500, 600_000, 900_000]
                    .get(rng.random_range(0..5))
                    .unwrap();
                let v = match rng.random_range(0..6) {
                    0 => None,
                    1 => Some(0.5),
                    2 => Some(2.0),
                    3 => Some(rng.random_range(0.0..3.0)),
                    _ => Some(rng.random_range(0.5..2.0)),
                };
                pt(t, v)
            })
            .collect();
        let track = GpsTrack::new("p", pts);
        let got: Vec<(i64, i64, usize)> = walking_segments(&track, &params)
            .iter()
            .map(|s| (s.start.0, s.end.0, s.points.len()))
            .collect();
        assert_eq!(got, segments_oracle(&track, &params));
        let segs = walking_segments(&track, &params);
        for s in &segs {
            assert!(s.duration_s() >= params.min_duration_s);
            assert!(s.points.iter().all(|p| p.speed_mps.is_some_and(|v| (0.5..=2.0).contains(&v))));
        }
        assert!(segs.windows(2).all(|w| w[0].end < w[1].start));
    }
}

#[test]
fn raising_min_duration_never_adds_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<GpsPoint> = (0..400)
        .map(|i| pt(i * 60_000, Some(if rng.random_bool(0.15) { 0.2 } else { 1.2 })))
        .collect();
    let track = GpsTrack::new("p", pts);
    let mut last = usize::MAX;
    for m in [0.0, 60.0, 300.0, 600.0, 1200.0, 3600.0] {
        let n = walking_segments(
            &track,
            &GeoParams {
                min_duration_s: m,
                ..Default::default()
            },
        )
        .len();
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn derived_speeds_match_haversine() {
    let track = GpsTrack::new(
        "p",
        vec![
            GpsPoint {
                t: Timestamp(0),
                lat: 39.95,
                lon: -75.16,
                speed_mps: None,
            },
            GpsPoint {
                t: Timestamp(300_000),
                lat: 39.955,
                lon: -75.16,
                speed_mps: None,
            },
            GpsPoint {
                t: Timestamp(600_000),
                lat: 39.955,
                lon: -75.16,
                speed_mps: None,
            },
        ],
    );
    let d = derive_speed(&track);
    // 0.005° of latitude is R·0.005·π/180 along a meridian.
    let v = 6_371_000.0 * 0.005f64.to_radians() / 300.0;
    assert!((d.points[1].speed_mps.unwrap() - v).abs() < 1e-9);
    assert_eq!(d.points[0].speed_mps, d.points[1].speed_mps);
    assert_eq!(d.points[2].speed_mps, Some(0.0));
}

fn cell(id: &str, ring: Vec<LatLon>, ranks: [f64; 4]) -> WalkabilityCell {
    WalkabilityCell {
        cell_id: id.into(),
        geometry: CellGeometry::Polygon(vec![ring]),
        rank_w: ranks[0],
        rank_x: ranks[1],
        rank_y: ranks[2],
        rank_z: ranks[3],
        score: None,
    }
}

fn square(lat: f64, lon: f64, half: f64) -> Vec<LatLon> {
    vec![
        LatLon::new(lat - half, lon - half),
        LatLon::new(lat - half, lon + half),
        LatLon::new(lat + half, lon + half),
        LatLon::new(lat + half, lon - half),
        LatLon::new(lat - half, lon - half),
    ]
}

#[test]
fn walkability_hand_values() {
    let c = cell("a", square(0.0, 0.0, 1.0), [3.0, 3.0, 6.0, 6.0]);
    assert_eq!(walkability_score(&c).unwrap(), 4.0);
    let z = cell("z", square(0.0, 0.0, 1.0), [0.0; 4]);
    assert_eq!(walkability_score(&z).unwrap(), 0.0);
    let bad = cell("b", square(0.0, 0.0, 1.0), [1.0, f64::NAN, 1.0, 1.0]);
    assert!(walkability_score(&bad).is_err());
    // Weights: unit vectors pick out 1/3, 1/3, 1/6, 1/6, summing to 1.
    let weights = [
        walkability_from_ranks(1.0, 0.0, 0.0, 0.0),
        walkability_from_ranks(0.0, 1.0, 0.0, 0.0),
        walkability_from_ranks(0.0, 0.0, 1.0, 0.0),
        walkability_from_ranks(0.0, 0.0, 0.0, 1.0),
    ];
    for (w, e) in weights.iter().zip([1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
        assert!((w - e).abs() <= 1e-15);
    }
    assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
}

proptest! {
    #[test]
    fn walkability_uniform_ranks_are_exact(r in 0.0f64..1e6) {
        prop_assert_eq!(walkability_from_ranks(r, r, r, r), r);
    }

    #[test]
    fn walkability_matches_weighted_sum(w in 0.0f64..20.0, x in 0.0f64..20.0, y in 0.0f64..20.0, z in 0.0f64..20.0) {
        let direct = w / 3.0 + x / 3.0 + y / 6.0 + z / 6.0;
        prop_assert!((walkability_from_ranks(w, x, y, z) - direct).abs() <= 1e-12);
    }

    #[test]
    fn walkability_is_monotone(base in proptest::array::uniform4(0.0f64..20.0), k in 0usize..4, d in 0.0f64..5.0) {
        let mut up = base;
        up[k] += d;
        let lo = walkability_from_ranks(base[0], base[1], base[2], base[3]);
        let hi = walkability_from_ranks(up[0], up[1], up[2], up[3]);
        prop_assert!(hi >= lo - 1e-12);
    }
}

/// Winding number of a closed ring around p (nonzero ⇒ inside).
fn winding_number(ring: &[LatLon], p: LatLon) -> i32 {
    let mut wn = 0;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        let side = (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat);
        if a.lat <= p.lat {
            if b.lat > p.lat && side > 0.0 {
                wn += 1;
            }
        } else if b.lat <= p.lat && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Random convex polygon: sorted angles on a jittered circle.
fn convex_polygon(rng: &mut ChaCha8Rng) -> Vec<LatLon> {
    let (clat, clon) = (rng.random_range(-60.0..60.0), rng.random_range(-170.0..170.0));
    let r = rng.random_range(0.001..0.05);
    let mut angles: Vec<f64> = (0..rng.random_range(3..12))
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let mut ring: Vec<LatLon> = angles
        .iter()
        .map(|a| LatLon::new(clat + r * a.sin(), clon + r * a.cos()))
        .collect();
    if rng.random_bool(0.5) {
        ring.reverse();
    }
    ring.push(ring[0]);
    ring
}

#[test]
fn point_in_polygon_agrees_with_winding_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut inside = 0;
    for _ in 0..1000 {
        let ring = convex_polygon(&mut rng);
        let (lat0, lat1) = ring.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.lat), b.max(p.lat)));
        let (lon0, lon1) = ring.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.lon), b.max(p.lon)));
        let p = LatLon::new(
            rng.random_range(lat0 - 0.01..lat1 + 0.01),
            rng.random_range(lon0 - 0.01..lon1 + 0.01),
        );
        let expected = winding_number(&ring, p) != 0;
        inside += usize::from(expected);
        assert_eq!(point_in_rings(&[ring], p), expected);
    }
    assert!(inside > 100 && inside < 900);
}

#[test]
fn spatial_join_contains_fallback_and_radius() {
    let cells = vec![
        cell("a", square(40.0, -75.0, 0.001), [10.0, 10.0, 10.0, 10.0]),
        cell("b", square(40.01, -75.0, 0.001), [3.0, 3.0, 6.0, 6.0]),
    ];
    // Centroid of a → a.
    let at = |lat: f64, lon: f64| GpsPoint {
        t: Timestamp(0),
        lat,
        lon,
        speed_mps: Some(1.0),
    };
    let r = spatial_join(&[at(40.0, -75.0)], &cells, 1000.0);
    assert_eq!(r[0].cell_id.as_deref(), Some("a"));
    assert_eq!(r[0].walkability, Some(10.0));

    // 500 m north of b's centroid: outside every polygon, within the radius.
    let dlat = (500.0 / 6_371_000.0f64).to_degrees();
    let p = at(40.01 + dlat, -75.0);
    assert!((haversine_m(LatLon::new(p.lat, p.lon), LatLon::new(40.01, -75.0)) - 500.0).abs() < 1e-6);
    let r = spatial_join(&[p], &cells, 1000.0);
    assert_eq!(r[0].cell_id.as_deref(), Some("b"));
    assert_eq!(r[0].walkability, Some(4.0));

    // 5 km away from everything.
    let far = at(40.05 + 5000.0f64 / 111_000.0, -75.0);
    let r = spatial_join(&[far], &cells, 1000.0);
    assert!(r[0].cell_id.is_none() && r[0].walkability.is_none());
}

#[test]
fn segment_tags_and_exports() {
    let pts: Vec<GpsPoint> = (0..20)
        .map(|i| pt(i * 60_000, Some(if (5..15).contains(&i) { 1.0 } else { 3.0 })))
        .collect();
    let track = GpsTrack::new("p7", pts.clone());
    let segs = walking_segments(&track, &GeoParams::default());
    assert_eq!(segs.len(), 1);
    let mut scored = spatial_join(&pts, &[], 1000.0);
    tag_segments(&mut scored, &segs);
    let tagged = scored.iter().filter(|s| s.segment_id.is_some()).count();
    assert_eq!(tagged, 10);

    let gj = scored_points_geojson(&scored);
    let f = &gj["features"][6]["properties"];
    assert_eq!(f["segment_id"], serde_json::json!(segs[0].segment_id));
    assert!(f["z_rmssd"].is_null() && f["walkability"].is_null());

    let mut buf = Vec::new();
    write_segments_csv(&segs, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("segment_id,start,end,mean_speed_mps,n_points"));
    assert_eq!(lines.next(), Some("p7-walk000,300000,840000,1,10"));
}
