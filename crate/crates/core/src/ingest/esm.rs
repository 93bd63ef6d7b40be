use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, open, parse_i64, ParseReport, Parsed};
use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const ESM_HEADER: [&str; 10] = [
    "participant_id",
    "survey_type",
    "t_utc_ms",
    "stress",
    "valence",
    "arousal",
    "sleep_quality",
    "walked_today",
    "walk_minutes",
    "infra_text",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyType {
    Morning,
    Afternoon,
    Evening,
    EndOfDay,
}

impl SurveyType {
    pub const ALL: [SurveyType; 4] = [
        SurveyType::Morning,
        SurveyType::Afternoon,
        SurveyType::Evening,
        SurveyType::EndOfDay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SurveyType::Morning => "morning",
            SurveyType::Afternoon => "afternoon",
            SurveyType::Evening => "evening",
            SurveyType::EndOfDay => "end_of_day",
        }
    }

    pub fn allows_sleep(self) -> bool {
        self == SurveyType::Morning
    }

    pub fn allows_walking(self) -> bool {
        self == SurveyType::EndOfDay
    }
}

impl fmt::Display for SurveyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurveyType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "morning" => Ok(SurveyType::Morning),
            "afternoon" => Ok(SurveyType::Afternoon),
            "evening" => Ok(SurveyType::Evening),
            "end_of_day" => Ok(SurveyType::EndOfDay),
            other => Err(Error::Parameter(format!("unknown survey type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsmResponse {
    pub participant_id: String,
    pub survey_type: SurveyType,
    pub t: Timestamp,
    pub stress_0_10: Option<i64>,
    pub valence: Option<i64>,
    pub arousal: Option<i64>,
    pub sleep_quality_1_5: Option<i64>,
    pub walked_today: Option<bool>,
    pub walk_minutes: Option<i64>,
    pub infra_text: Option<String>,
}

impl EsmResponse {
    pub fn empty(participant_id: impl Into<String>, survey_type: SurveyType, t: Timestamp) -> Self {
        EsmResponse {
            participant_id: participant_id.into(),
            survey_type,
            t,
            stress_0_10: None,
            valence: None,
            arousal: None,
            sleep_quality_1_5: None,
            walked_today: None,
            walk_minutes: None,
            infra_text: None,
        }
    }
}

/// Inclusive bounds for the scale-coded items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsmBounds {
    pub stress: (i64, i64),
    pub valence: (i64, i64),
    pub arousal: (i64, i64),
    pub sleep_quality: (i64, i64),
}

impl Default for EsmBounds {
    fn default() -> Self {
        EsmBounds {
            stress: (0, 10),
            valence: (-3, 3),
            arousal: (0, 6),
            sleep_quality: (1, 5),
        }
    }
}

pub fn parse_esm(path: &Path, bounds: &EsmBounds) -> Result<Parsed<Vec<EsmResponse>>> {
    let reader = open(path)?;
    parse_esm_reader(reader, bounds, &path.display().to_string())
}

/// Parses survey rows, enforcing per-type field presence and scale bounds.
/// Offending fields are nulled with a warning; the row itself is kept.
/// Output is ordered by participant, then time.
pub fn parse_esm_reader<R: Read>(
    reader: R,
    bounds: &EsmBounds,
    context: &str,
) -> Result<Parsed<Vec<EsmResponse>>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &ESM_HEADER, context)?;
    let mut report = ParseReport::new(context);
    let mut out = Vec::new();
    for record in rdr.records() {
        let Ok(record) = record else {
            report.reject("malformed_row");
            continue;
        };
        if record.len() != ESM_HEADER.len() {
            report.reject("malformed_row");
            continue;
        }
        let pid = record.get(0).unwrap_or("");
        if pid.is_empty() {
            report.reject("missing_participant");
            continue;
        }
        let Ok(survey_type) = record.get(1).unwrap_or("").parse::<SurveyType>() else {
            report.reject("unknown_survey_type");
            continue;
        };
        let Some(t) = parse_i64(record.get(2)).filter(|&t| t >= 0) else {
            report.reject("invalid_timestamp");
            continue;
        };

        let mut resp = EsmResponse::empty(pid, survey_type, Timestamp(t));
        resp.stress_0_10 = scale_field(record.get(3), bounds.stress, "stress", &mut report);
        resp.valence = scale_field(record.get(4), bounds.valence, "valence", &mut report);
        resp.arousal = scale_field(record.get(5), bounds.arousal, "arousal", &mut report);
        let sleep = scale_field(record.get(6), bounds.sleep_quality, "sleep_quality", &mut report);
        let walked = bool_field(record.get(7), &mut report);
        let minutes = scale_field(record.get(8), (0, i64::MAX), "walk_minutes", &mut report);
        let text = record
            .get(9)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);

        if survey_type.allows_sleep() {
            resp.sleep_quality_1_5 = sleep;
        } else if sleep.is_some() {
            report.warn("field_not_allowed:sleep_quality");
        }
        if survey_type.allows_walking() {
            resp.walked_today = walked;
            resp.walk_minutes = minutes;
            resp.infra_text = text;
        } else {
            if walked.is_some() {
                report.warn("field_not_allowed:walked_today");
            }
            if minutes.is_some() {
                report.warn("field_not_allowed:walk_minutes");
            }
            if text.is_some() {
                report.warn("field_not_allowed:infra_text");
            }
        }
        report.accept();
        out.push(resp);
    }
    out.sort_by(|a, b| a.participant_id.cmp(&b.participant_id).then(a.t.cmp(&b.t)));
    Ok(Parsed { value: out, report })
}

fn scale_field(field: Option<&str>, (lo, hi): (i64, i64), name: &str, report: &mut ParseReport) -> Option<i64> {
    let raw = field.filter(|s| !s.is_empty())?;
    match raw.parse::<i64>() {
        Ok(v) if (lo..=hi).contains(&v) => Some(v),
        Ok(_) => {
            report.warn(&format!("out_of_bounds:{name}"));
            None
        }
        Err(_) => {
            report.warn(&format!("unparseable:{name}"));
            None
        }
    }
}

fn bool_field(field: Option<&str>, report: &mut ParseReport) -> Option<bool> {
    let raw = field.filter(|s| !s.is_empty())?;
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "y" | "1" => Some(true),
        "false" | "no" | "n" | "0" => Some(false),
        _ => {
            report.warn("unparseable:walked_today");
            None
        }
    }
}

pub fn write_esm<W: Write>(responses: &[EsmResponse], out: W) -> Result<()> {
    fn opt<T: ToString>(v: &Option<T>) -> String {
        v.as_ref().map(ToString::to_string).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESM_HEADER)?;
    for r in responses {
        w.write_record([
            r.participant_id.clone(),
            r.survey_type.to_string(),
            r.t.0.to_string(),
            opt(&r.stress_0_10),
            opt(&r.valence),
            opt(&r.arousal),
            opt(&r.sleep_quality_1_5),
            opt(&r.walked_today),
            opt(&r.walk_minutes),
            r.infra_text.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("esm output", e))?;
    Ok(())
}
