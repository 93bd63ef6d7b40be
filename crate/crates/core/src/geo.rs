//! GPS cleaning, walking segments, walkability scores and the spatial join
//! between fixes and walkability cells.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::g6;
use crate::ingest::{CellGeometry, GpsPoint, GpsTrack, LatLon, WalkabilityCell};
use crate::time::Timestamp;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoParams {
    /// Fixes closer than this to their predecessor are near-duplicates.
    pub dedup_horizon_ms: i64,
    pub v_min_mps: f64,
    pub v_max_mps: f64,
    pub min_duration_s: f64,
    pub max_gap_s: f64,
    pub fallback_radius_m: f64,
}

impl Default for GeoParams {
    fn default() -> Self {
        GeoParams {
            dedup_horizon_ms: 1000,
            v_min_mps: 0.5,
            v_max_mps: 2.0,
            min_duration_s: 300.0,
            max_gap_s: 750.0,
            fallback_radius_m: 1000.0,
        }
    }
}

pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

fn latlon(p: &GpsPoint) -> LatLon {
    LatLon::new(p.lat, p.lon)
}

/// Keeps only the first fix of every run whose successive timestamps are
/// less than `horizon_ms` apart. The result is strictly increasing in time.
pub fn dedup(track: &GpsTrack, horizon_ms: i64) -> GpsTrack {
    let horizon = horizon_ms.max(1);
    let points = track
        .points
        .iter()
        .enumerate()
        .filter(|(i, p)| *i == 0 || p.t.0 - track.points[i - 1].t.0 >= horizon)
        .map(|(_, p)| *p)
        .collect();
    GpsTrack::new(track.participant_id.clone(), points)
}

/// Fills missing speeds from the haversine distance to the previous fix;
/// the first fix borrows the second's derived speed. Recorded speeds stay.
pub fn derive_speed(track: &GpsTrack) -> GpsTrack {
    let pts = &track.points;
    let derived = |i: usize| -> Option<f64> {
        let dt = pts[i].t.diff_secs(pts[i - 1].t);
        (dt > 0.0).then(|| haversine_m(latlon(&pts[i - 1]), latlon(&pts[i])) / dt)
    };
    let points = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let speed = p.speed_mps.or_else(|| match i {
                0 if pts.len() > 1 => pts[1].speed_mps.or_else(|| derived(1)),
                0 => None,
                _ => derived(i),
            });
            GpsPoint { speed_mps: speed, ..*p }
        })
        .collect();
    GpsTrack::new(track.participant_id.clone(), points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkingSegment {
    pub segment_id: String,
    pub participant_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub points: Vec<GpsPoint>,
    pub mean_speed_mps: f64,
}

impl WalkingSegment {
    pub fn duration_s(&self) -> f64 {
        self.end.diff_secs(self.start)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

pub fn segment_id(participant_id: &str, index: usize) -> String {
    format!("{participant_id}-walk{index:03}")
}

/// Maximal runs of in-band fixes with no gap above `max_gap_s`, kept when
/// they span at least `min_duration_s`. Fixes without a speed break runs.
pub fn walking_segments(track: &GpsTrack, params: &GeoParams) -> Vec<WalkingSegment> {
    let max_gap_ms = (params.max_gap_s * 1000.0).round() as i64;
    let in_band = |p: &GpsPoint| {
        p.speed_mps
            .is_some_and(|v| v >= params.v_min_mps && v <= params.v_max_mps)
    };
    let pts = &track.points;
    let mut out = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !in_band(&pts[i]) {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < pts.len() && in_band(&pts[i]) && pts[i].t.0 - pts[i - 1].t.0 <= max_gap_ms {
            i += 1;
        }
        let run = &pts[start..i];
        let (first, last) = (run[0].t, run[run.len() - 1].t);
        if last.diff_secs(first) >= params.min_duration_s {
            let mean = run.iter().filter_map(|p| p.speed_mps).sum::<f64>() / run.len() as f64;
            out.push(WalkingSegment {
                segment_id: segment_id(&track.participant_id, out.len()),
                participant_id: track.participant_id.clone(),
                start: first,
                end: last,
                points: run.to_vec(),
                mean_speed_mps: mean,
            });
        }
    }
    out
}

/// `W = w/3 + x/3 + y/6 + z/6`, evaluated as `a + (b − a)/3` with
/// `a = (w + x)/2`, `b = (y + z)/2` so equal ranks come back exactly.
pub fn walkability_score(cell: &WalkabilityCell) -> Result<f64> {
    let ranks = [cell.rank_w, cell.rank_x, cell.rank_y, cell.rank_z];
    if ranks.iter().any(|r| !r.is_finite()) {
        return Err(Error::Parameter(format!("cell {} has a missing rank", cell.cell_id)));
    }
    Ok(walkability_from_ranks(ranks[0], ranks[1], ranks[2], ranks[3]))
}

pub fn walkability_from_ranks(w: f64, x: f64, y: f64, z: f64) -> f64 {
    let a = 0.5 * (w + x);
    let b = 0.5 * (y + z);
    a + (b - a) / 3.0
}

/// Fills `score` on every cell.
pub fn score_cells(cells: &mut [WalkabilityCell]) -> Result<()> {
    for c in cells.iter_mut() {
        c.score = Some(walkability_score(c)?);
    }
    Ok(())
}

/// Even-odd point-in-polygon over all rings (holes included); points on any
/// edge count as inside.
pub fn point_in_rings(rings: &[Vec<LatLon>], p: LatLon) -> bool {
    let mut inside = false;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if on_segment(a, b, p) {
                return true;
            }
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
                if p.lon < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

fn on_segment(a: LatLon, b: LatLon, p: LatLon) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs()).max(1e-300);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BBox {
    lat: (f64, f64),
    lon: (f64, f64),
}

impl BBox {
    fn of(ring: &[LatLon]) -> Self {
        ring.iter().fold(
            BBox {
                lat: (f64::INFINITY, f64::NEG_INFINITY),
                lon: (f64::INFINITY, f64::NEG_INFINITY),
            },
            |b, p| BBox {
                lat: (b.lat.0.min(p.lat), b.lat.1.max(p.lat)),
                lon: (b.lon.0.min(p.lon), b.lon.1.max(p.lon)),
            },
        )
    }

    fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.lat.0 && p.lat <= self.lat.1 && p.lon >= self.lon.0 && p.lon <= self.lon.1
    }
}

/// Read-only lookup structure over a set of cells.
#[derive(Debug, Clone)]
pub struct CellIndex<'a> {
    cells: &'a [WalkabilityCell],
    boxes: Vec<Option<BBox>>,
    centroids: Vec<LatLon>,
}

impl<'a> CellIndex<'a> {
    pub fn new(cells: &'a [WalkabilityCell]) -> Self {
        CellIndex {
            cells,
            boxes: cells
                .iter()
                .map(|c| match &c.geometry {
                    CellGeometry::Polygon(rings) => Some(BBox::of(&rings[0])),
                    CellGeometry::Point(_) => None,
                })
                .collect(),
            centroids: cells.iter().map(|c| c.geometry.centroid()).collect(),
        }
    }

    /// First containing polygon, else the nearest centroid within `radius_m`.
    pub fn locate(&self, p: LatLon, radius_m: f64) -> Option<&'a WalkabilityCell> {
        for (i, cell) in self.cells.iter().enumerate() {
            if let (Some(bbox), CellGeometry::Polygon(rings)) = (&self.boxes[i], &cell.geometry) {
                if bbox.contains(p) && point_in_rings(rings, p) {
                    return Some(cell);
                }
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = haversine_m(p, *c);
            if d <= radius_m && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| &self.cells[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub point: GpsPoint,
    pub cell_id: Option<String>,
    pub walkability: Option<f64>,
    pub z_rmssd: Option<f64>,
    pub segment_id: Option<String>,
}

pub fn spatial_join(points: &[GpsPoint], cells: &[WalkabilityCell], fallback_radius_m: f64) -> Vec<ScoredPoint> {
    let index = CellIndex::new(cells);
    points
        .iter()
        .map(|p| {
            let cell = index.locate(latlon(p), fallback_radius_m);
            let walkability = cell.and_then(|c| c.score.or_else(|| walkability_score(c).ok()));
            ScoredPoint {
                point: *p,
                cell_id: cell.filter(|_| walkability.is_some()).map(|c| c.cell_id.clone()),
                walkability,
                z_rmssd: None,
                segment_id: None,
            }
        })
        .collect()
}

/// Tags each point with the walking segment whose closed span contains it.
pub fn tag_segments(points: &mut [ScoredPoint], segments: &[WalkingSegment]) {
    for p in points.iter_mut() {
        let i = segments.partition_point(|s| s.start <= p.point.t);
        p.segment_id = (i > 0 && segments[i - 1].contains(p.point.t)).then(|| segments[i - 1].segment_id.clone());
    }
}

/// FeatureCollection of point features carrying `z_rmssd`, `walkability`
/// and `segment_id` (null when absent).
pub fn scored_points_geojson(points: &[ScoredPoint]) -> Value {
    let features: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.point.lon, p.point.lat]},
                "properties": {
                    "t_utc_ms": p.point.t.0,
                    "cell_id": p.cell_id,
                    "walkability": p.walkability,
                    "z_rmssd": p.z_rmssd,
                    "segment_id": p.segment_id,
                }
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// `segment_id,start,end,mean_speed_mps,n_points`
pub fn write_segments_csv<W: Write>(segments: &[WalkingSegment], mut out: W) -> std::io::Result<()> {
    writeln!(out, "segment_id,start,end,mean_speed_mps,n_points")?;
    for s in segments {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.segment_id,
            s.start.0,
            s.end.0,
            g6(s.mean_speed_mps),
            s.points.len()
        )?;
    }
    Ok(())
}
