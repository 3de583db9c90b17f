//! The answer schema: one row per submitted assignment.
//!
//! Mandatory columns: `assignment_id`, `worker_id`, `session_id`,
//! `submit_time`, the trapping and gold columns, and for every rating slot `i`
//! present in the header `rating_{i}_clip`, `rating_{i}_value`,
//! `rating_{i}_played`. Everything else may be absent, in which case the
//! section is treated as not shown.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::certificate::split_tokens;
use crate::error::IngestError;
use crate::model::{Method, PresentationOrder, Rating, RatingScale, Timestamp};
use crate::table::{RowView, Table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatedItem {
    pub clip: String,
    /// `None` when the question was left unanswered.
    pub value: Option<i32>,
    pub played: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PresentationOrder>,
}

/// Answer to a trapping or gold question. `expected` is in the displayed
/// frame, as echoed by the client from the input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlAnswer {
    pub clip: String,
    pub answer: Option<i32>,
    pub expected: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<u32>,
    pub played: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PresentationOrder>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarpodsCheck {
    pub answer: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvTest {
    /// Index of the clip judged better, per pair.
    pub answers: Vec<Option<u8>>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualificationRecord {
    pub hearing_passed: bool,
    pub language_passed: bool,
    pub device_type: String,
}

impl QualificationRecord {
    pub fn passed(&self) -> bool {
        self.hearing_passed && self.language_passed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub assignment_id: String,
    pub worker_id: String,
    pub session_id: String,
    pub method: Method,
    pub submit_time: Timestamp,
    pub ratings: Vec<RatedItem>,
    pub trapping: ControlAnswer,
    pub gold: ControlAnswer,
    pub earpods: Option<EarpodsCheck>,
    pub env_test: Option<EnvTest>,
    pub qualification: Option<QualificationRecord>,
    pub certificates: Vec<String>,
    pub detected_devices: Vec<String>,
    pub client_fingerprint: String,
}

impl Submission {
    /// Every question answered.
    pub fn is_complete(&self) -> bool {
        self.ratings.iter().all(|r| r.value.is_some()) && self.trapping.answer.is_some() && self.gold.answer.is_some()
    }

    /// Every clip of the session, controls included, fully played.
    pub fn playback_complete(&self) -> bool {
        self.ratings.iter().all(|r| r.played) && self.trapping.played && self.gold.played
    }

    /// Answered rating questions as ratings; controls are never included.
    pub fn to_ratings(&self) -> Vec<Rating> {
        self.ratings
            .iter()
            .filter_map(|r| {
                Some(Rating {
                    stimulus_id: r.clip.clone(),
                    worker_id: self.worker_id.clone(),
                    session_id: self.session_id.clone(),
                    value: r.value?,
                    presentation_order: r.order,
                    timestamp: self.submit_time,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub parsed: usize,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedBatch {
    pub submissions: Vec<Submission>,
    pub report: ParseReport,
}

const MANDATORY: [&str; 10] = [
    "assignment_id",
    "worker_id",
    "session_id",
    "submit_time",
    "trapping_clip",
    "trapping_answer",
    "trapping_expected",
    "gold_clip",
    "gold_answer",
    "gold_expected",
];

/// Header of an answer batch for `block` rating slots.
pub fn answer_header(block: usize) -> Vec<String> {
    let mut h: Vec<String> = ["assignment_id", "worker_id", "session_id", "submit_time", "method"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=block {
        for suffix in ["clip", "value", "played", "order"] {
            h.push(format!("rating_{i}_{suffix}"));
        }
    }
    for c in [
        "trapping_clip",
        "trapping_answer",
        "trapping_expected",
        "trapping_played",
        "trapping_order",
        "gold_clip",
        "gold_answer",
        "gold_expected",
        "gold_tolerance",
        "gold_played",
        "gold_order",
        "earpods_answer",
        "earpods_passed",
        "env_answers",
        "env_passed",
        "qual_hearing_passed",
        "qual_language_passed",
        "qual_device_type",
        "certificates",
        "detected_devices",
        "client_fingerprint",
    ] {
        h.push(c.to_string());
    }
    h
}

fn flag(b: bool) -> String {
    String::from(if b { "1" } else { "0" })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn order(o: Option<PresentationOrder>) -> String {
    o.map(|o| o.as_str().to_string()).unwrap_or_default()
}

/// One answer row in `answer_header(block)` column order. Rating slots
/// beyond the submission's own are left empty.
pub fn submission_record(sub: &Submission, block: usize) -> Vec<String> {
    let mut r = Vec::with_capacity(5 + 4 * block + 21);
    r.push(sub.assignment_id.clone());
    r.push(sub.worker_id.clone());
    r.push(sub.session_id.clone());
    r.push(sub.submit_time.seconds().to_string());
    r.push(sub.method.as_str().to_string());
    for i in 0..block {
        match sub.ratings.get(i) {
            Some(it) => {
                r.push(it.clip.clone());
                r.push(opt(it.value));
                r.push(flag(it.played));
                r.push(order(it.order));
            }
            None => r.extend(core::iter::repeat_n(String::new(), 4)),
        }
    }
    for (c, gold) in [(&sub.trapping, false), (&sub.gold, true)] {
        r.push(c.clip.clone());
        r.push(opt(c.answer));
        r.push(c.expected.to_string());
        if gold {
            r.push(opt(c.tolerance));
        }
        r.push(flag(c.played));
        r.push(order(c.order));
    }
    match &sub.earpods {
        Some(e) => {
            r.push(e.answer.clone());
            r.push(flag(e.passed));
        }
        None => r.extend([String::new(), String::new()]),
    }
    match &sub.env_test {
        Some(e) => {
            let answers: Vec<String> = e.answers.iter().map(|a| opt(*a)).collect();
            r.push(answers.join(";"));
            r.push(flag(e.passed));
        }
        None => r.extend([String::new(), String::new()]),
    }
    match &sub.qualification {
        Some(q) => {
            r.push(flag(q.hearing_passed));
            r.push(flag(q.language_passed));
            r.push(q.device_type.clone());
        }
        None => r.extend(core::iter::repeat_n(String::new(), 3)),
    }
    r.push(sub.certificates.join(";"));
    r.push(sub.detected_devices.join(";"));
    r.push(sub.client_fingerprint.clone());
    r
}

/// Answer batch for a list of submissions, sized to the longest session.
pub fn submissions_to_table(subs: &[Submission]) -> Table {
    let block = subs.iter().map(|s| s.ratings.len()).max().unwrap_or(0);
    let mut t = Table::new(answer_header(block));
    t.rows = subs.iter().map(|s| submission_record(s, block)).collect();
    t
}

struct Row<'a> {
    view: RowView<'a>,
}

impl<'a> Row<'a> {
    fn cell(&self, name: &str) -> &'a str {
        self.view.get(name).unwrap_or("")
    }

    fn required(&self, name: &str) -> Result<&'a str, String> {
        match self.cell(name) {
            "" => Err(format!("empty `{name}`")),
            v => Ok(v),
        }
    }

    fn int<T: core::str::FromStr>(&self, name: &str) -> Result<Option<T>, String> {
        match self.cell(name) {
            "" => Ok(None),
            v => v
                .parse()
                .map(Some)
                .map_err(|_| format!("`{name}`: not a number: {v:?}")),
        }
    }

    fn flag(&self, name: &str) -> Result<Option<bool>, String> {
        match self.cell(name).to_ascii_lowercase().as_str() {
            "" => Ok(None),
            "1" | "true" | "yes" => Ok(Some(true)),
            "0" | "false" | "no" => Ok(Some(false)),
            v => Err(format!("`{name}`: not a boolean: {v:?}")),
        }
    }

    fn order(&self, name: &str) -> Result<Option<PresentationOrder>, String> {
        match self.cell(name) {
            "" => Ok(None),
            v => v
                .parse()
                .map(Some)
                .map_err(|_| format!("`{name}`: bad presentation order {v:?}")),
        }
    }

    fn list(&self, name: &str) -> Vec<String> {
        split_tokens(self.cell(name))
    }
}

fn scale_value(scale: &RatingScale, name: &str, v: Option<i32>) -> Result<Option<i32>, String> {
    match v {
        Some(x) if !scale.contains(x) => Err(format!(
            "`{name}`: {x} outside the {} scale {}..{}",
            scale.method, scale.min, scale.max
        )),
        v => Ok(v),
    }
}

fn paired_order(
    scale: &RatingScale,
    row: &Row<'_>,
    name: &str,
    answered: bool,
) -> Result<Option<PresentationOrder>, String> {
    let o = row.order(name)?;
    match (scale.method, o) {
        (Method::Ccr, None) if answered => Err(format!("`{name}` missing for a CCR answer")),
        (Method::Ccr, o) => Ok(o),
        (_, Some(_)) => Err(format!("`{name}` given for a non-CCR answer")),
        (_, None) => Ok(None),
    }
}

fn control(scale: &RatingScale, row: &Row<'_>, prefix: &str, gold: bool) -> Result<ControlAnswer, String> {
    let answer = scale_value(
        scale,
        &format!("{prefix}_answer"),
        row.int(&format!("{prefix}_answer"))?,
    )?;
    Ok(ControlAnswer {
        clip: row.required(&format!("{prefix}_clip"))?.to_string(),
        answer,
        expected: row
            .int(&format!("{prefix}_expected"))?
            .ok_or_else(|| format!("empty `{prefix}_expected`"))?,
        tolerance: if gold { row.int("gold_tolerance")? } else { None },
        played: row.flag(&format!("{prefix}_played"))?.unwrap_or(false),
        order: paired_order(scale, row, &format!("{prefix}_order"), answer.is_some())?,
    })
}

fn parse_row(row: &Row<'_>, block: usize, scale: &RatingScale) -> Result<Submission, String> {
    match row.cell("method") {
        "" => {}
        m => {
            let m: Method = m.parse().map_err(|_| format!("unknown method {m:?}"))?;
            if m != scale.method {
                return Err(format!("method {m} does not match the experiment ({})", scale.method));
            }
        }
    }
    let mut ratings = Vec::with_capacity(block);
    for i in 1..=block {
        let clip = row.cell(&format!("rating_{i}_clip"));
        let name = format!("rating_{i}_value");
        let value = scale_value(scale, &name, row.int(&name)?)?;
        if clip.is_empty() {
            if value.is_some() {
                return Err(format!("`{name}` given without `rating_{i}_clip`"));
            }
            continue;
        }
        ratings.push(RatedItem {
            clip: clip.to_string(),
            value,
            played: row.flag(&format!("rating_{i}_played"))?.unwrap_or(false),
            order: paired_order(scale, row, &format!("rating_{i}_order"), value.is_some())?,
        });
    }
    if ratings.is_empty() {
        return Err("no rating answers".to_string());
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = ratings.iter().find(|r| !seen.insert(r.clip.as_str())) {
        return Err(format!("clip {:?} rated twice in one session", dup.clip));
    }

    let earpods = row.flag("earpods_passed")?.map(|passed| EarpodsCheck {
        answer: row.cell("earpods_answer").to_string(),
        passed,
    });
    let env_cell = row.cell("env_answers");
    let env_test = match (row.flag("env_passed")?, env_cell.is_empty()) {
        (None, true) => None,
        (passed, _) => {
            let answers = env_cell
                .split(';')
                .map(|a| match a.trim() {
                    "" => Ok(None),
                    a => a
                        .parse::<u8>()
                        .map(Some)
                        .map_err(|_| format!("`env_answers`: bad entry {a:?}")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(EnvTest {
                answers,
                passed: passed.unwrap_or(false),
            })
        }
    };
    let qualification = match (row.flag("qual_hearing_passed")?, row.flag("qual_language_passed")?) {
        (None, None) => None,
        (h, l) => Some(QualificationRecord {
            hearing_passed: h.unwrap_or(false),
            language_passed: l.unwrap_or(false),
            device_type: row.cell("qual_device_type").to_string(),
        }),
    };

    Ok(Submission {
        assignment_id: row.required("assignment_id")?.to_string(),
        worker_id: row.required("worker_id")?.to_string(),
        session_id: row.required("session_id")?.to_string(),
        method: scale.method,
        submit_time: Timestamp(row.int("submit_time")?.ok_or("empty `submit_time`")?),
        ratings,
        trapping: control(scale, row, "trapping", false)?,
        gold: control(scale, row, "gold", true)?,
        earpods,
        env_test,
        qualification,
        certificates: row.list("certificates"),
        detected_devices: row.list("detected_devices"),
        client_fingerprint: row.cell("client_fingerprint").to_string(),
    })
}

/// Parses an answer batch. Every data row ends up either as a submission or
/// as a row error in the report.
pub fn parse_answer_batch(table: &Table, scale: &RatingScale) -> Result<ParsedBatch, IngestError> {
    let mut missing: Vec<String> = MANDATORY
        .iter()
        .filter(|c| table.column(c).is_none())
        .map(|c| c.to_string())
        .collect();
    let block = (1..)
        .take_while(|i| table.column(&format!("rating_{i}_clip")).is_some())
        .count();
    if block == 0 {
        return Err(IngestError::NoRatingColumns);
    }
    for i in 1..=block {
        for suffix in ["value", "played"] {
            let c = format!("rating_{i}_{suffix}");
            if table.column(&c).is_none() {
                missing.push(c);
            }
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns(missing.join(", ")));
    }

    let mut out = ParsedBatch::default();
    out.report.rows = table.rows.len();
    for (i, cells) in table.rows.iter().enumerate() {
        let row = Row {
            view: RowView {
                header: &table.header,
                cells,
            },
        };
        if cells.len() != table.header.len() {
            out.report.errors.push(RowError {
                row: i + 1,
                assignment_id: row.view.get("assignment_id").map(ToString::to_string),
                message: format!("{} cells, header has {}", cells.len(), table.header.len()),
            });
            continue;
        }
        match parse_row(&row, block, scale) {
            Ok(s) => out.submissions.push(s),
            Err(message) => out.report.errors.push(RowError {
                row: i + 1,
                assignment_id: Some(row.cell("assignment_id").to_string()).filter(|s| !s.is_empty()),
                message,
            }),
        }
    }
    out.report.parsed = out.submissions.len();
    Ok(out)
}
