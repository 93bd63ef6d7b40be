use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, open, parse_f64, parse_i64, ParseReport, Parsed};
use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const GPS_HEADER: [&str; 4] = ["t_utc_ms", "lat", "lon", "speed_mps"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsPoint {
    pub t: Timestamp,
    pub lat: f64,
    pub lon: f64,
    pub speed_mps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsTrack {
    pub participant_id: String,
    pub points: Vec<GpsPoint>,
}

impl GpsTrack {
    pub fn new(participant_id: impl Into<String>, points: Vec<GpsPoint>) -> Self {
        GpsTrack {
            participant_id: participant_id.into(),
            points,
        }
    }
}

pub fn parse_gps(path: &Path, participant_id: &str) -> Result<Parsed<GpsTrack>> {
    let reader = open(path)?;
    parse_gps_reader(reader, participant_id, &path.display().to_string())
}

/// Rows are stably sorted by time; duplicate timestamps survive (removing
/// them is [`crate::geo::dedup`]'s job).
pub fn parse_gps_reader<R: Read>(
    reader: R,
    participant_id: &str,
    context: &str,
) -> Result<Parsed<GpsTrack>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &GPS_HEADER, context)?;
    let mut report = ParseReport::new(context);
    let mut points = Vec::new();
    for record in rdr.records() {
        let Ok(record) = record else {
            report.reject("malformed_row");
            continue;
        };
        if record.len() != 4 {
            report.reject("malformed_row");
            continue;
        }
        let (Some(t), Some(lat), Some(lon)) = (
            parse_i64(record.get(0)),
            parse_f64(record.get(1)),
            parse_f64(record.get(2)),
        ) else {
            report.reject("unparseable_value");
            continue;
        };
        let speed_field = record.get(3).unwrap_or("");
        let speed = if speed_field.is_empty() {
            None
        } else {
            match speed_field.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                _ => {
                    report.reject("invalid_speed");
                    continue;
                }
            }
        };
        if t < 0 {
            report.reject("negative_timestamp");
            continue;
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            report.reject("coordinate_out_of_range");
            continue;
        }
        report.accept();
        points.push(GpsPoint {
            t: Timestamp(t),
            lat,
            lon,
            speed_mps: speed,
        });
    }
    points.sort_by_key(|p| p.t);
    if points.is_empty() {
        return Err(Error::EmptySeries(context.to_string()));
    }
    Ok(Parsed {
        value: GpsTrack::new(participant_id, points),
        report,
    })
}

pub fn write_gps<W: Write>(track: &GpsTrack, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", GPS_HEADER.join(","))?;
    for p in &track.points {
        match p.speed_mps {
            Some(v) => writeln!(out, "{},{},{},{}", p.t.0, p.lat, p.lon, v)?,
            None => writeln!(out, "{},{},{},", p.t.0, p.lat, p.lon)?,
        }
    }
    Ok(())
}
