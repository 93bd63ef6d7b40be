//! Survey merging, response rates and keyword analysis of the free-text
//! infrastructure reports.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g6;
use crate::ingest::{EsmResponse, SurveyType};
use crate::time::{Timestamp, TzOffset};

const STOPWORDS_EN: &str = include_str!("../assets/stopwords_en.txt");

/// The bundled English stopword list.
pub fn default_stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_word_list(STOPWORDS_EN))
}

/// One word per line; blank lines and `#` comments ignored.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize)
        .collect()
}

/// Lowercases, deletes apostrophes and slashes (so "n/a" and "didn't" stay
/// one token), turns other punctuation into spaces, and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !matches!(c, '\'' | '\u{2019}' | '/'))
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokens(normalized: &str) -> impl Iterator<Item = &str> {
    normalized.split_whitespace()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EsmDataset {
    /// Retained responses per participant, time-ordered.
    pub participants: BTreeMap<String, Vec<EsmResponse>>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub survey_type: SurveyType,
    pub t: Timestamp,
    pub missing: Vec<String>,
}

/// Fields a response of the given type must carry to be retained.
pub fn missing_fields(r: &EsmResponse) -> Vec<&'static str> {
    let mut missing = Vec::new();
    if r.stress_0_10.is_none() {
        missing.push("stress");
    }
    if r.valence.is_none() {
        missing.push("valence");
    }
    if r.arousal.is_none() {
        missing.push("arousal");
    }
    if r.survey_type.allows_sleep() && r.sleep_quality_1_5.is_none() {
        missing.push("sleep_quality");
    }
    if r.survey_type.allows_walking() && r.walked_today.is_none() {
        missing.push("walked_today");
    }
    missing
}

/// Groups by participant and drops incomplete responses one at a time;
/// a participant whose every response is dropped is kept with none.
pub fn merge_surveys(responses: &[EsmResponse]) -> EsmDataset {
    let mut out = EsmDataset::default();
    for r in responses {
        let kept = out.participants.entry(r.participant_id.clone()).or_default();
        let missing = missing_fields(r);
        if missing.is_empty() {
            kept.push(r.clone());
        } else {
            out.excluded.push(Exclusion {
                participant_id: r.participant_id.clone(),
                survey_type: r.survey_type,
                t: r.t,
                missing: missing.into_iter().map(String::from).collect(),
            });
        }
    }
    for v in out.participants.values_mut() {
        v.sort_by_key(|r| (r.t, r.survey_type));
    }
    out.excluded.sort_by(|a, b| (&a.participant_id, a.t).cmp(&(&b.participant_id, b.t)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRate {
    pub participant_id: String,
    pub survey_type: SurveyType,
    pub answered: usize,
    pub expected: usize,
    pub rate: f64,
}

/// One row per participant and survey type; one response expected per day.
pub fn response_rates(dataset: &EsmDataset, study_days: usize) -> Result<Vec<ResponseRate>> {
    if study_days == 0 {
        return Err(Error::Parameter("study_days must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (pid, responses) in &dataset.participants {
        for ty in SurveyType::ALL {
            let answered = responses.iter().filter(|r| r.survey_type == ty).count();
            if answered > study_days {
                log::warn!("{pid}: {answered} {ty} responses over {study_days} days; rate capped at 1");
            }
            out.push(ResponseRate {
                participant_id: pid.clone(),
                survey_type: ty,
                answered,
                expected: study_days,
                rate: (answered as f64 / study_days as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

pub const DEFAULT_NEUTRAL: [&str; 8] = [
    "none",
    "no",
    "nope",
    "n/a",
    "na",
    "nothing",
    "i didn't see any issue",
    "i didnt see any issue",
];

const NEGATIONS: [&str; 8] = ["no", "none", "nope", "nothing", "na", "nah", "not", "nil"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeutralFilter {
    phrases: HashSet<String>,
}

impl Default for NeutralFilter {
    fn default() -> Self {
        NeutralFilter::new(DEFAULT_NEUTRAL)
    }
}

impl NeutralFilter {
    pub fn new<I, S>(stoplist: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        NeutralFilter {
            phrases: stoplist.into_iter().map(|s| normalize(s.as_ref())).collect(),
        }
    }

    /// Empty text counts as neutral.
    pub fn is_neutral(&self, text: &str) -> bool {
        let n = normalize(text);
        self.phrases.contains(&n) || tokens(&n).all(|t| NEGATIONS.contains(&t))
    }
}

pub fn filter_neutral(text: &str, stoplist: &[String]) -> bool {
    NeutralFilter::new(stoplist).is_neutral(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Sidewalk,
    Crosswalk,
    UnevenSurface,
    TrashDebris,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Sidewalk,
        Category::Crosswalk,
        Category::UnevenSurface,
        Category::TrashDebris,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Sidewalk => "sidewalk",
            Category::Crosswalk => "crosswalk",
            Category::UnevenSurface => "uneven_surface",
            Category::TrashDebris => "trash_debris",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Parameter(format!("unknown category `{s}`")))
    }
}

/// Categories in priority order with their keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordMap(pub Vec<(Category, Vec<String>)>);

impl Default for KeywordMap {
    fn default() -> Self {
        let entry = |c, words: &[&str]| (c, words.iter().map(|w| w.to_string()).collect());
        KeywordMap(vec![
            entry(Category::Sidewalk, &["sidewalk", "pavement", "footpath", "pole"]),
            entry(
                Category::Crosswalk,
                &["crosswalk", "crossing", "intersection", "traffic light", "cars"],
            ),
            entry(Category::UnevenSurface, &["uneven", "crack", "pothole", "bump", "brick"]),
            entry(Category::TrashDebris, &["trash", "litter", "debris", "garbage"]),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categorization {
    pub category: Category,
    pub matched_keywords: Vec<String>,
}

/// First category with a keyword occurring in the normalized text wins;
/// every matching keyword is recorded.
pub fn categorize(text: &str, map: &KeywordMap) -> Categorization {
    let n = normalize(text);
    let mut category = None;
    let mut matched = Vec::new();
    for (cat, words) in &map.0 {
        for w in words {
            let key = normalize(w);
            if !key.is_empty() && n.contains(&key) {
                category.get_or_insert(*cat);
                matched.push(key);
            }
        }
    }
    Categorization {
        category: category.unwrap_or(Category::Other),
        matched_keywords: matched,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfrastructureReport {
    pub participant_id: String,
    pub t: Timestamp,
    pub raw_text: String,
    pub normalized_text: String,
    /// Absent for neutral responses.
    pub category: Option<Category>,
    pub matched_keywords: Vec<String>,
}

/// Every retained response carrying infrastructure text, classified.
pub fn infrastructure_reports(
    dataset: &EsmDataset,
    neutral: &NeutralFilter,
    keywords: &KeywordMap,
) -> Vec<InfrastructureReport> {
    dataset
        .participants
        .values()
        .flatten()
        .filter_map(|r| {
            let raw = r.infra_text.as_ref()?;
            let normalized_text = normalize(raw);
            let (category, matched_keywords) = if neutral.is_neutral(raw) {
                (None, Vec::new())
            } else {
                let c = categorize(raw, keywords);
                (Some(c.category), c.matched_keywords)
            };
            Some(InfrastructureReport {
                participant_id: r.participant_id.clone(),
                t: r.t,
                raw_text: raw.clone(),
                normalized_text,
                category,
                matched_keywords,
            })
        })
        .collect()
}

pub fn category_counts(reports: &[InfrastructureReport]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.into_iter().map(|c| (c, 0)).collect();
    for c in reports.iter().filter_map(|r| r.category) {
        *counts.entry(c).or_default() += 1;
    }
    counts
}

/// Ranked by count, ties broken alphabetically.
pub fn word_frequencies<S: AsRef<str>>(
    texts: &[S],
    stopwords: &HashSet<String>,
    top_n: usize,
) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        let n = normalize(text.as_ref());
        for tok in tokens(&n) {
            if tok.chars().count() >= 2 && !stopwords.contains(tok) {
                *counts.entry(tok.to_string()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}

/// Distinct local days with at least one categorized report, per
/// participant. Participants with only neutral reports count 0.
pub fn problem_day_counts(reports: &[InfrastructureReport], tz: TzOffset) -> BTreeMap<String, usize> {
    let mut days: BTreeMap<String, BTreeSet<NaiveDate>> = BTreeMap::new();
    for r in reports {
        let set = days.entry(r.participant_id.clone()).or_default();
        if r.category.is_some() {
            set.insert(tz.local_date(r.t));
        }
    }
    days.into_iter().map(|(p, d)| (p, d.len())).collect()
}

/// `participant_id,t_utc_ms,category,matched_keywords,raw_text`; neutral
/// reports have an empty category and keywords are `;`-joined.
pub fn write_reports_csv<W: Write>(reports: &[InfrastructureReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant_id", "t_utc_ms", "category", "matched_keywords", "raw_text"])?;
    for r in reports {
        w.write_record([
            r.participant_id.as_str(),
            &r.t.0.to_string(),
            r.category.map(Category::as_str).unwrap_or(""),
            &r.matched_keywords.join(";"),
            &r.raw_text,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `rank,word,count`
pub fn write_frequencies_csv<W: Write>(freqs: &[(String, usize)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "rank,word,count")?;
    for (i, (w, c)) in freqs.iter().enumerate() {
        writeln!(out, "{},{w},{c}", i + 1)?;
    }
    Ok(())
}

/// `participant_id,survey_type,answered,expected,rate`
pub fn write_rates_csv<W: Write>(rates: &[ResponseRate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "participant_id,survey_type,answered,expected,rate")?;
    for r in rates {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.participant_id,
            r.survey_type,
            r.answered,
            r.expected,
            g6(r.rate)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_is_idempotent() {
        for s in ["  NONE ", "I didn't see any issue!", "n/a", "Poles... in the   sidewalk"] {
            let once = normalize(s);
            assert_eq!(normalize(&once), once);
        }
        assert_eq!(normalize("N/A"), "na");
        assert_eq!(normalize("Don't-stop, at a crosswalk."), "dont stop at a crosswalk");
    }

    #[test]
    fn stopword_asset_loads() {
        let sw = default_stopwords();
        assert!(sw.contains("the") && sw.contains("didnt"));
        assert!(!sw.contains("sidewalk") && !sw.contains("walking"));
    }

    #[test]
    fn category_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
    }
}
