//! Parsing and validation of the raw input files into canonical,
//! time-sorted series.
//!
//! Every parser accounts for each data row: it is either accepted or counted
//! under a rejection reason in the [`ParseReport`].

mod eda;
mod esm;
mod gps;
mod ibi;
mod walkability;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eda::{parse_eda, parse_eda_reader, write_eda, EdaOptions, EdaSample, EdaSeries, Gap};
pub use esm::{parse_esm, parse_esm_reader, write_esm, EsmBounds, EsmResponse, SurveyType};
pub use gps::{parse_gps, parse_gps_reader, write_gps, GpsPoint, GpsTrack};
pub use ibi::{parse_ibi, parse_ibi_reader, write_ibi, IbiGate, IbiSample, IbiSeries};
pub use walkability::{
    parse_walkability, parse_walkability_str, write_walkability, CellGeometry, LatLon,
    WalkabilityCell,
};

/// Row accounting for one parsed file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub source: String,
    pub input_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Rejected rows by reason.
    pub rejections: BTreeMap<String, usize>,
    /// Non-fatal findings (nulled fields, rate drift) by kind.
    pub warnings: BTreeMap<String, usize>,
}

impl ParseReport {
    fn new(source: impl Into<String>) -> Self {
        ParseReport {
            source: source.into(),
            ..Default::default()
        }
    }

    fn accept(&mut self) {
        self.input_rows += 1;
        self.accepted += 1;
    }

    fn reject(&mut self, reason: &str) {
        self.input_rows += 1;
        self.rejected += 1;
        *self.rejections.entry(reason.to_string()).or_default() += 1;
    }

    /// Reclassify a previously accepted row as rejected (e.g. duplicates found
    /// after sorting).
    fn demote(&mut self, reason: &str) {
        self.accepted -= 1;
        self.rejected += 1;
        *self.rejections.entry(reason.to_string()).or_default() += 1;
    }

    fn warn(&mut self, kind: &str) {
        *self.warnings.entry(kind.to_string()).or_default() += 1;
    }

    pub fn rejected_for(&self, reason: &str) -> usize {
        self.rejections.get(reason).copied().unwrap_or(0)
    }

    pub fn warnings_for(&self, kind: &str) -> usize {
        self.warnings.get(kind).copied().unwrap_or(0)
    }
}

/// A parsed value together with its row accounting.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub report: ParseReport,
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

/// Checks that the header row matches `expected` exactly (after trimming).
pub(crate) fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    expected: &[&str],
    context: &str,
) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(context, format!("unreadable header: {e}")))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::format(
            context,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub(crate) fn parse_f64(field: Option<&str>) -> Option<f64> {
    field
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse::<f64>().ok())
}

pub(crate) fn parse_i64(field: Option<&str>) -> Option<i64> {
    field
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse::<i64>().ok())
}
