use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, open, parse_f64, parse_i64, ParseReport, Parsed};
use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const IBI_HEADER: [&str; 2] = ["t_utc_ms", "ibi_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbiSample {
    /// Beat time.
    pub t: Timestamp,
    pub ibi_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbiSeries {
    pub participant_id: String,
    pub samples: Vec<IbiSample>,
}

impl IbiSeries {
    pub fn new(participant_id: impl Into<String>, samples: Vec<IbiSample>) -> Self {
        IbiSeries {
            participant_id: participant_id.into(),
            samples,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
}

/// Physiological plausibility gate, exclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbiGate {
    pub min_ms: f64,
    pub max_ms: f64,
}

impl Default for IbiGate {
    fn default() -> Self {
        IbiGate {
            min_ms: 200.0,
            max_ms: 3000.0,
        }
    }
}

impl IbiGate {
    pub fn admits(&self, ibi_ms: f64) -> bool {
        ibi_ms.is_finite() && ibi_ms > self.min_ms && ibi_ms < self.max_ms
    }
}

pub fn parse_ibi(path: &Path, participant_id: &str, gate: &IbiGate) -> Result<Parsed<IbiSeries>> {
    let reader = open(path)?;
    parse_ibi_reader(reader, participant_id, gate, &path.display().to_string())
}

pub fn parse_ibi_reader<R: Read>(
    reader: R,
    participant_id: &str,
    gate: &IbiGate,
    context: &str,
) -> Result<Parsed<IbiSeries>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &IBI_HEADER, context)?;
    let mut report = ParseReport::new(context);
    let mut samples = Vec::new();
    for record in rdr.records() {
        let Ok(record) = record else {
            report.reject("malformed_row");
            continue;
        };
        if record.len() != 2 {
            report.reject("malformed_row");
            continue;
        }
        let (Some(t), Some(ibi)) = (parse_i64(record.get(0)), parse_f64(record.get(1))) else {
            report.reject("unparseable_value");
            continue;
        };
        if t < 0 {
            report.reject("negative_timestamp");
            continue;
        }
        if !gate.admits(ibi) {
            report.reject("implausible_ibi");
            continue;
        }
        report.accept();
        samples.push(IbiSample {
            t: Timestamp(t),
            ibi_ms: ibi,
        });
    }
    samples.sort_by_key(|s| s.t);
    let before = samples.len();
    samples.dedup_by_key(|s| s.t);
    for _ in samples.len()..before {
        report.demote("duplicate_timestamp");
    }
    if samples.is_empty() {
        return Err(Error::EmptySeries(context.to_string()));
    }
    Ok(Parsed {
        value: IbiSeries::new(participant_id, samples),
        report,
    })
}

/// Canonical serialisation; re-parsing reproduces the series bit-exactly.
pub fn write_ibi<W: Write>(series: &IbiSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", IBI_HEADER.join(","))?;
    for s in &series.samples {
        writeln!(out, "{},{}", s.t.0, s.ibi_ms)?;
    }
    Ok(())
}
