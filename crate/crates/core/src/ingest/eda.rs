use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, open, parse_f64, parse_i64, ParseReport, Parsed};
use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const EDA_HEADER: [&str; 2] = ["t_utc_ms", "sc_us"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdaSample {
    pub t: Timestamp,
    /// Skin conductance, microsiemens.
    pub sc_us: f64,
}

/// A recording dropout: no samples strictly between `start` and `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaSeries {
    pub participant_id: String,
    pub nominal_rate_hz: f64,
    pub samples: Vec<EdaSample>,
    pub gaps: Vec<Gap>,
}

impl EdaSeries {
    /// Builds a series and declares every gap longer than `gap_factor`
    /// nominal periods.
    pub fn from_samples(
        participant_id: impl Into<String>,
        nominal_rate_hz: f64,
        samples: Vec<EdaSample>,
        gap_factor: f64,
    ) -> Self {
        let gaps = detect_gaps(&samples, nominal_rate_hz, gap_factor);
        EdaSeries {
            participant_id: participant_id.into(),
            nominal_rate_hz,
            samples,
            gaps,
        }
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.nominal_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index ranges of the gap-free stretches between declared gaps.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut start = 0;
        for gap in &self.gaps {
            let end = self.samples.partition_point(|s| s.t <= gap.start);
            if end > start {
                out.push(start..end);
            }
            start = end;
        }
        if start < self.samples.len() {
            out.push(start..self.samples.len());
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sc_us).collect()
    }
}

fn detect_gaps(samples: &[EdaSample], rate_hz: f64, gap_factor: f64) -> Vec<Gap> {
    let limit_ms = gap_factor * 1000.0 / rate_hz;
    samples
        .windows(2)
        .filter(|w| (w[1].t.0 - w[0].t.0) as f64 > limit_ms)
        .map(|w| Gap {
            start: w[0].t,
            end: w[1].t,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdaOptions {
    pub nominal_rate_hz: f64,
    /// Spacing above this many nominal periods is a declared gap.
    pub gap_factor: f64,
    /// Relative spacing tolerance for the rate check.
    pub rate_tolerance: f64,
    /// Off-rate runs longer than this many intervals raise a warning.
    pub rate_warning_run: usize,
}

impl Default for EdaOptions {
    fn default() -> Self {
        EdaOptions {
            nominal_rate_hz: 4.0,
            gap_factor: 2.0,
            rate_tolerance: 0.1,
            rate_warning_run: 10,
        }
    }
}

pub fn parse_eda(path: &Path, participant_id: &str, opts: &EdaOptions) -> Result<Parsed<EdaSeries>> {
    let reader = open(path)?;
    parse_eda_reader(reader, participant_id, opts, &path.display().to_string())
}

pub fn parse_eda_reader<R: Read>(
    reader: R,
    participant_id: &str,
    opts: &EdaOptions,
    context: &str,
) -> Result<Parsed<EdaSeries>> {
    if !(opts.nominal_rate_hz > 0.0) {
        return Err(Error::Parameter("EDA nominal rate must be positive".into()));
    }
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &EDA_HEADER, context)?;
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
        let (Some(t), Some(sc)) = (parse_i64(record.get(0)), parse_f64(record.get(1))) else {
            report.reject("unparseable_value");
            continue;
        };
        if t < 0 {
            report.reject("negative_timestamp");
            continue;
        }
        if !sc.is_finite() {
            report.reject("non_finite_conductance");
            continue;
        }
        if sc < 0.0 {
            report.reject("negative_conductance");
            continue;
        }
        report.accept();
        samples.push(EdaSample {
            t: Timestamp(t),
            sc_us: sc,
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

    let series = EdaSeries::from_samples(participant_id, opts.nominal_rate_hz, samples, opts.gap_factor);
    let runs = off_rate_runs(&series, opts);
    for _ in 0..runs {
        report.warn("rate_mismatch");
    }
    if runs > 0 {
        log::warn!("{context}: {runs} sustained sampling-rate deviation(s) from {} Hz", opts.nominal_rate_hz);
    }
    Ok(Parsed {
        value: series,
        report,
    })
}

/// Counts runs of more than `rate_warning_run` consecutive intervals whose
/// spacing deviates from the nominal period by more than the tolerance,
/// ignoring declared gaps.
fn off_rate_runs(series: &EdaSeries, opts: &EdaOptions) -> usize {
    let period_ms = 1000.0 / opts.nominal_rate_hz;
    let gap_limit = opts.gap_factor * period_ms;
    let mut runs = 0;
    let mut current = 0usize;
    for w in series.samples.windows(2) {
        let dt = (w[1].t.0 - w[0].t.0) as f64;
        let off = dt <= gap_limit && ((dt - period_ms).abs() > opts.rate_tolerance * period_ms);
        if off {
            current += 1;
        } else {
            if current > opts.rate_warning_run {
                runs += 1;
            }
            current = 0;
        }
    }
    if current > opts.rate_warning_run {
        runs += 1;
    }
    runs
}

pub fn write_eda<W: Write>(series: &EdaSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", EDA_HEADER.join(","))?;
    for s in &series.samples {
        writeln!(out, "{},{}", s.t.0, s.sc_us)?;
    }
    Ok(())
}
