//! The canonical scenario suite, the multi-day load bundle and a synthetic
//! walkability grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ingest::{CellGeometry, WalkabilityCell};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub spec: ScenarioSpec,
    pub bundle: SessionBundle,
    pub truth: GroundTruth,
}

const WALK: f64 = 1.3;

fn walk(start_s: f64, end_s: f64) -> SpeedLeg {
    SpeedLeg {
        start_s,
        end_s,
        speed_mps: WALK,
    }
}

fn base(name: &str, pid: &str, seed: u64, duration_s: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        participant_id: pid.into(),
        seed,
        duration_s,
        gps: GpsPlan {
            interval_s: 60.0,
            legs: vec![walk(600.0, 3000.0_f64.min(duration_s - 300.0))],
            ..GpsPlan::default()
        },
        ..ScenarioSpec::default()
    }
}

/// Infrastructure texts with their intended categories.
pub fn report_texts() -> Vec<PlannedText> {
    let t = |text: &str, category: Option<Category>| PlannedText {
        text: text.into(),
        category,
    };
    vec![
        t("Sometimes there are poles in the sidewalk", Some(Category::Sidewalk)),
        t("Cars typically don't stop at a crosswalk", Some(Category::Crosswalk)),
        t("water on the ground constantly", Some(Category::Other)),
        t("No.", None),
        t("Uneven bricks near the library", Some(Category::UnevenSurface)),
        t("none", None),
        t("Trash piled up by the bus stop", Some(Category::TrashDebris)),
        t("I didn't see any issue", None),
    ]
}

/// Specs of the canonical suite, in a fixed order.
pub fn fixture_specs() -> Vec<ScenarioSpec> {
    let mut out = Vec::new();

    let mut s = base("pure_tonic", "f01", 101, 1800.0);
    s.eda.tonic_knots = vec![(0.0, 2.0), (900.0, 2.6), (1800.0, 2.2)];
    out.push(s);

    let mut s = base("single_scr", "f02", 102, 1800.0);
    s.eda.impulses = vec![Impulse::amplitude(900.0, 0.3)];
    s.eda.snr_db = Some(20.0);
    out.push(s);

    let mut s = base("two_scr", "f03", 103, 1800.0);
    s.eda.impulses = vec![Impulse::amplitude(600.0, 0.5), Impulse::amplitude(1200.0, 0.3)];
    s.eda.snr_db = Some(20.0);
    out.push(s);

    let mut s = base("five_scr", "f04", 104, 1800.0);
    s.eda.impulses = [0.1, 0.25, 0.4, 0.15, 0.3]
        .iter()
        .enumerate()
        .map(|(i, &a)| Impulse::amplitude(300.0 * (i + 1) as f64, a))
        .collect();
    s.eda.snr_db = Some(20.0);
    out.push(s);

    let mut s = base("scr_burst", "f05", 105, 1800.0);
    s.eda.impulses = (0..13).map(|i| Impulse::amplitude(600.0 + 10.0 * i as f64, 0.3)).collect();
    s.eda.noise_sd = 0.005;
    out.push(s);

    let mut s = base("eda_gap_walk", "f06", 106, 3600.0);
    s.eda.gaps = vec![Span::new(1500.0, 1620.0)];
    s.eda.background = Some(RandomScrs::default());
    s.eda.noise_sd = 0.005;
    out.push(s);

    let mut s = base("rmssd_dip_walk", "f07", 107, 3600.0);
    s.ibi.dips = vec![RmssdDip {
        start_s: 1500.0,
        end_s: 1620.0,
        rmssd_ms: 12.0,
    }];
    out.push(s);

    let mut s = base("rmssd_dip_outside_walk", "f08", 108, 3600.0);
    s.gps.legs = vec![walk(2400.0, 3300.0)];
    s.ibi.dips = vec![RmssdDip {
        start_s: 1000.0,
        end_s: 1120.0,
        rmssd_ms: 12.0,
    }];
    out.push(s);

    let mut s = base("gps_duplicate_burst", "f09", 109, 3600.0);
    s.gps.duplicate_bursts = [300.0, 900.0, 1200.0, 2400.0]
        .iter()
        .map(|&t| DuplicateBurst { t_s: t, count: 3 })
        .collect();
    out.push(s);

    out.push(composite_spec());
    out
}

/// Three hours with two walks, one RMSSD dip and one SCR burst, each inside
/// a walk, plus a 14-day survey record.
pub fn composite_spec() -> ScenarioSpec {
    let mut s = base("composite_3h", "f10", 110, 10_800.0);
    s.gps.legs = vec![
        walk(1800.0, 4500.0),
        SpeedLeg {
            start_s: 5000.0,
            end_s: 5600.0,
            speed_mps: 8.0,
        },
        walk(6300.0, 9000.0),
    ];
    s.ibi.dips = vec![RmssdDip {
        start_s: 2700.0,
        end_s: 3120.0,
        rmssd_ms: 12.0,
    }];
    let burst = Span::new(6900.0, 7620.0);
    s.eda.impulses = (0..=72)
        .map(|i| Impulse::amplitude(burst.start_s + 10.0 * i as f64, 0.3))
        .collect();
    s.eda.background = Some(RandomScrs::default());
    s.eda.quiet = vec![Span::new(burst.start_s - 10.0, burst.end_s + 10.0)];
    s.eda.tonic_knots = vec![(0.0, 2.0), (3600.0, 2.4), (7200.0, 2.1), (10_800.0, 2.5)];
    s.eda.noise_sd = 0.005;
    s.esm = Some(EsmPlan {
        study_days: 14,
        response_rate: 0.5,
        incomplete_per_type: 2,
        texts: report_texts(),
    });
    s
}

pub fn fixture_suite() -> Result<Vec<Fixture>> {
    fixture_specs()
        .into_iter()
        .map(|spec| {
            let (bundle, truth) = generate(&spec)?;
            Ok(Fixture {
                name: spec.name.clone(),
                spec,
                bundle,
                truth,
            })
        })
        .collect()
}

/// A continuous multi-day record at full rates: 4 Hz EDA with about one
/// response a minute, ~1 s beats, a 5-minute GPS fix interval and a daily
/// schedule of walks and one drive.
pub fn multi_day_spec(participant_id: &str, days: u32, seed: u64) -> ScenarioSpec {
    const DAY: f64 = 86_400.0;
    let mut legs = Vec::new();
    let mut dips = Vec::new();
    for d in 0..days {
        let o = d as f64 * DAY;
        let h = |hours: f64| o + hours * 3600.0;
        legs.push(walk(h(7.5), h(8.0) + 600.0));
        legs.push(SpeedLeg {
            start_s: h(8.0) + 600.0,
            end_s: h(8.5) + 600.0,
            speed_mps: 8.0,
        });
        legs.push(walk(h(12.0), h(12.5)));
        legs.push(SpeedLeg {
            start_s: h(17.0),
            end_s: h(17.5),
            speed_mps: 8.0,
        });
        legs.push(walk(h(17.5), h(18.25)));
        dips.push(RmssdDip {
            start_s: h(17.75),
            end_s: h(17.75) + 420.0,
            rmssd_ms: 15.0,
        });
    }
    ScenarioSpec {
        name: format!("multi_day_{days}d"),
        participant_id: participant_id.into(),
        seed,
        // 2024-03-04T00:00 at UTC−5.
        start_ms: 1_709_528_400_000,
        duration_s: days as f64 * DAY,
        tz_offset_min: -300,
        ibi: IbiPlan {
            mean_ms: 1000.0,
            dips,
            ..IbiPlan::default()
        },
        eda: EdaPlan {
            background: Some(RandomScrs::default()),
            tonic_knots: (0..=days * 8)
                .map(|k| (k as f64 * DAY / 8.0, 2.0 + 0.5 * ((k % 5) as f64) / 4.0))
                .collect(),
            noise_sd: 0.01,
            ..EdaPlan::default()
        },
        gps: GpsPlan {
            interval_s: 300.0,
            legs,
            ..GpsPlan::default()
        },
        esm: Some(EsmPlan {
            study_days: days.max(1),
            response_rate: 0.75,
            incomplete_per_type: days / 7,
            texts: report_texts(),
        }),
    }
}

/// Square cells of side `2·half_extent_m / n` centred on `center`, with
/// seeded integer ranks in 1..=20.
pub fn walkability_grid(center: LatLon, half_extent_m: f64, n: usize, seed: u64) -> Vec<WalkabilityCell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 2.0 * half_extent_m / n as f64;
    let corner = offset(center, -half_extent_m, -half_extent_m);
    let mut cells = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let p = |i: usize, j: usize| offset(corner, j as f64 * side, i as f64 * side);
            let ring = vec![p(row, col), p(row, col + 1), p(row + 1, col + 1), p(row + 1, col), p(row, col)];
            let mut rank = || rng.random_range(1..=20) as f64;
            cells.push(WalkabilityCell {
                cell_id: format!("c{row:02}{col:02}"),
                geometry: CellGeometry::Polygon(vec![ring]),
                rank_w: rank(),
                rank_x: rank(),
                rank_y: rank(),
                rank_z: rank(),
                score: None,
            });
        }
    }
    cells
}
