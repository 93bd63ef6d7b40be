use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{open, ParseReport, Parsed};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
pub enum CellGeometry {
    /// Closed rings; the first is the outer boundary, any others are holes.
    Polygon(Vec<Vec<LatLon>>),
    Point(LatLon),
}

impl CellGeometry {
    /// Area-weighted centroid of the outer ring (planar in degrees), or the
    /// point itself.
    pub fn centroid(&self) -> LatLon {
        match self {
            CellGeometry::Point(p) => *p,
            CellGeometry::Polygon(rings) => ring_centroid(&rings[0]),
        }
    }
}

fn ring_centroid(ring: &[LatLon]) -> LatLon {
    // Work relative to the first vertex to keep the cross products well scaled.
    let origin = ring[0];
    let rel: Vec<(f64, f64)> = ring
        .iter()
        .map(|p| (p.lon - origin.lon, p.lat - origin.lat))
        .collect();
    let mut a2 = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for w in rel.windows(2) {
        let cross = w[0].0 * w[1].1 - w[1].0 * w[0].1;
        a2 += cross;
        cx += (w[0].0 + w[1].0) * cross;
        cy += (w[0].1 + w[1].1) * cross;
    }
    if a2.abs() < 1e-18 {
        let n = (ring.len() - 1).max(1) as f64;
        let (slat, slon) = ring[..ring.len() - 1]
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lon));
        return LatLon::new(slat / n, slon / n);
    }
    LatLon::new(origin.lat + cy / (3.0 * a2), origin.lon + cx / (3.0 * a2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkabilityCell {
    pub cell_id: String,
    pub geometry: CellGeometry,
    /// Intersection density rank.
    pub rank_w: f64,
    /// Transit proximity rank.
    pub rank_x: f64,
    /// Employment mix rank.
    pub rank_y: f64,
    /// Employment and household mix rank.
    pub rank_z: f64,
    pub score: Option<f64>,
}

pub fn parse_walkability(path: &Path) -> Result<Parsed<Vec<WalkabilityCell>>> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    parse_walkability_str(&text, &path.display().to_string())
}

pub fn parse_walkability_str(text: &str, context: &str) -> Result<Parsed<Vec<WalkabilityCell>>> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::format(context, "expected a GeoJSON FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::format(context, "FeatureCollection without `features` array"))?;

    let mut report = ParseReport::new(context);
    let mut cells = Vec::with_capacity(features.len());
    for (idx, feature) in features.iter().enumerate() {
        match parse_feature(feature, idx) {
            Ok(cell) => {
                report.accept();
                cells.push(cell);
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok(Parsed {
        value: cells,
        report,
    })
}

fn parse_feature(feature: &Value, idx: usize) -> std::result::Result<WalkabilityCell, &'static str> {
    let empty = Map::new();
    let props = feature
        .get("properties")
        .and_then(Value::as_object)
        .unwrap_or(&empty);
    let rank = |key: &str| -> std::result::Result<f64, &'static str> {
        let v = props.get(key).and_then(Value::as_f64).ok_or("missing_rank")?;
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err("invalid_rank")
        }
    };
    let (rank_w, rank_x, rank_y, rank_z) = (rank("rank_w")?, rank("rank_x")?, rank("rank_y")?, rank("rank_z")?);

    let geometry = feature.get("geometry").ok_or("missing_geometry")?;
    let geometry = match geometry.get("type").and_then(Value::as_str) {
        Some("Polygon") => {
            let rings = geometry
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or("malformed_geometry")?;
            if rings.is_empty() {
                return Err("malformed_geometry");
            }
            let rings = rings
                .iter()
                .map(parse_ring)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            CellGeometry::Polygon(rings)
        }
        Some("Point") => CellGeometry::Point(parse_position(
            geometry.get("coordinates").ok_or("malformed_geometry")?,
        )?),
        _ => return Err("unsupported_geometry"),
    };

    let cell_id = match props.get("cell_id").or_else(|| feature.get("id")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("cell-{idx}"),
    };
    Ok(WalkabilityCell {
        cell_id,
        geometry,
        rank_w,
        rank_x,
        rank_y,
        rank_z,
        score: None,
    })
}

fn parse_position(v: &Value) -> std::result::Result<LatLon, &'static str> {
    let arr = v.as_array().ok_or("malformed_geometry")?;
    let (Some(lon), Some(lat)) = (
        arr.first().and_then(Value::as_f64),
        arr.get(1).and_then(Value::as_f64),
    ) else {
        return Err("malformed_geometry");
    };
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err("coordinate_out_of_range");
    }
    Ok(LatLon::new(lat, lon))
}

/// Parses a ring and closes it if the last vertex does not repeat the first.
fn parse_ring(v: &Value) -> std::result::Result<Vec<LatLon>, &'static str> {
    let mut ring = v
        .as_array()
        .ok_or("malformed_geometry")?
        .iter()
        .map(parse_position)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if ring.first() != ring.last() {
        let first = ring[0];
        ring.push(first);
    }
    if ring.len() < 4 {
        return Err("degenerate_ring");
    }
    Ok(ring)
}

/// Serialises cells (and their scores, when computed) as a FeatureCollection.
pub fn write_walkability(cells: &[WalkabilityCell]) -> Value {
    let features: Vec<Value> = cells
        .iter()
        .map(|c| {
            let geometry = match &c.geometry {
                CellGeometry::Point(p) => json!({"type": "Point", "coordinates": [p.lon, p.lat]}),
                CellGeometry::Polygon(rings) => json!({
                    "type": "Polygon",
                    "coordinates": rings
                        .iter()
                        .map(|r| r.iter().map(|p| vec![p.lon, p.lat]).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                }),
            };
            let mut props = json!({
                "cell_id": c.cell_id,
                "rank_w": c.rank_w,
                "rank_x": c.rank_x,
                "rank_y": c.rank_y,
                "rank_z": c.rank_z,
            });
            if let Some(s) = c.score {
                props["walkability"] = json!(s);
            }
            json!({"type": "Feature", "geometry": geometry, "properties": props})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: usize, lat: f64, lon: f64, closed: bool) -> Value {
        let mut ring = vec![
            vec![lon, lat],
            vec![lon + 0.01, lat],
            vec![lon + 0.01, lat + 0.01],
            vec![lon, lat + 0.01],
        ];
        if closed {
            ring.push(vec![lon, lat]);
        }
        json!({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [ring]},
            "properties": {"cell_id": format!("c{id}"), "rank_w": 3, "rank_x": 3, "rank_y": 6, "rank_z": 6}
        })
    }

    fn collection(features: Vec<Value>) -> String {
        json!({"type": "FeatureCollection", "features": features}).to_string()
    }

    #[test]
    fn single_square() {
        let p = parse_walkability_str(&collection(vec![square(0, 39.95, -75.16, true)]), "t").unwrap();
        assert_eq!(p.value.len(), 1);
        assert_eq!(p.value[0].rank_y, 6.0);
        let c = p.value[0].geometry.centroid();
        assert!((c.lat - 39.955).abs() < 1e-9 && (c.lon + 75.155).abs() < 1e-9);
    }

    #[test]
    fn missing_rank_rejected() {
        let mut f = square(0, 0.0, 0.0, true);
        f["properties"].as_object_mut().unwrap().remove("rank_z");
        let p = parse_walkability_str(&collection(vec![f, square(1, 1.0, 1.0, true)]), "t").unwrap();
        assert_eq!(p.value.len(), 1);
        assert_eq!(p.report.rejected_for("missing_rank"), 1);
    }

    #[test]
    fn line_geometry_rejected() {
        let f = json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 1]]},
            "properties": {"rank_w": 1, "rank_x": 1, "rank_y": 1, "rank_z": 1}
        });
        let p = parse_walkability_str(&collection(vec![f]), "t").unwrap();
        assert!(p.value.is_empty());
        assert_eq!(p.report.rejected_for("unsupported_geometry"), 1);
    }

    #[test]
    fn ten_features_all_rings_closed() {
        let feats = (0..10)
            .map(|i| square(i, 39.0 + i as f64 * 0.02, -75.0, i % 2 == 0))
            .collect();
        let p = parse_walkability_str(&collection(feats), "t").unwrap();
        assert_eq!(p.value.len(), 10);
        for cell in &p.value {
            let CellGeometry::Polygon(rings) = &cell.geometry else { panic!() };
            for ring in rings {
                assert_eq!(ring.first(), ring.last());
                assert_eq!(ring.len(), 5);
            }
        }
    }
}
