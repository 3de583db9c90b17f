//! Shared domain types: stimuli, rating scales, conditions, ratings and
//! certificates, plus the clip-name to condition-label convention.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn seconds(self) -> u64 {
        self.0
    }

    pub fn plus(self, seconds: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(seconds))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Test procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Acr,
    Dcr,
    Ccr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Acr => "ACR",
            Method::Dcr => "DCR",
            Method::Ccr => "CCR",
        }
    }

    /// DCR and CCR questions present a reference next to the processed clip.
    pub fn is_paired(self) -> bool {
        !matches!(self, Method::Acr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ACR" => Ok(Method::Acr),
            "DCR" => Ok(Method::Dcr),
            "CCR" => Ok(Method::Ccr),
            _ => Err(ModelError::UnknownMethod(s.to_owned())),
        }
    }
}

const ACR_LABELS: [&str; 5] = ["Bad", "Poor", "Fair", "Good", "Excellent"];
const DCR_LABELS: [&str; 5] = [
    "Degradation is very annoying",
    "Degradation is annoying",
    "Degradation is slightly annoying",
    "Degradation is audible but not annoying",
    "Degradation is inaudible",
];
const CCR_LABELS: [&str; 7] = [
    "Much Worse",
    "Worse",
    "Slightly Worse",
    "About the Same",
    "Slightly Better",
    "Better",
    "Much Better",
];

/// An integer opinion scale with one label per level, lowest level first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub method: Method,
    pub min: i32,
    pub max: i32,
    pub labels: Vec<String>,
}

impl RatingScale {
    /// The standard scale for a method: ACR and DCR are 1..=5, CCR is -3..=3.
    pub fn for_method(method: Method) -> RatingScale {
        let (min, max, labels): (i32, i32, &[&str]) = match method {
            Method::Acr => (1, 5, &ACR_LABELS),
            Method::Dcr => (1, 5, &DCR_LABELS),
            Method::Ccr => (-3, 3, &CCR_LABELS),
        };
        RatingScale {
            method,
            min,
            max,
            labels: labels.iter().map(|l| (*l).to_owned()).collect(),
        }
    }

    /// Number of levels on the scale.
    pub fn levels(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn contains(&self, value: i32) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn check(&self, value: i32) -> Result<i32, ModelError> {
        if self.contains(value) {
            Ok(value)
        } else {
            Err(ModelError::OutOfScale {
                value,
                min: self.min,
                max: self.max,
            })
        }
    }

    /// Integer closest to `value`, clamped onto the scale.
    pub fn clamp_round(&self, value: f64) -> i32 {
        let r = libm::round(value);
        if r < self.min as f64 {
            self.min
        } else if r > self.max as f64 {
            self.max
        } else {
            r as i32
        }
    }

    /// Checks that the scale matches the fixed range of its method and that
    /// every level is labelled.
    pub fn validate(&self) -> Result<(), ModelError> {
        let std = RatingScale::for_method(self.method);
        if self.min != std.min || self.max != std.max {
            return Err(ModelError::ScaleMismatch(self.method));
        }
        if self.labels.len() != self.levels() {
            return Err(ModelError::LabelCount {
                expected: self.levels(),
                found: self.labels.len(),
            });
        }
        Ok(())
    }

    pub fn label(&self, value: i32) -> Option<&str> {
        if !self.contains(value) {
            return None;
        }
        self.labels.get((value - self.min) as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Rating,
    Training,
    Trapping,
    Gold,
    Reference,
    EnvPair,
}

impl Role {
    pub fn has_expected_answer(self) -> bool {
        matches!(self, Role::Trapping | Role::Gold)
    }
}

/// One speech clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub url: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_answer: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<u32>,
    /// Id of the reference clip paired with this one (DCR/CCR).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl Stimulus {
    /// A clip whose id is its URL.
    pub fn new(url: impl Into<String>, role: Role) -> Stimulus {
        let url = url.into();
        Stimulus {
            id: url.clone(),
            url,
            role,
            condition: None,
            expected_answer: None,
            tolerance: None,
            reference: None,
        }
    }

    pub fn with_condition(mut self, condition: impl Into<String>) -> Stimulus {
        self.condition = Some(condition.into());
        self
    }

    pub fn with_expected(mut self, answer: i32) -> Stimulus {
        self.expected_answer = Some(answer);
        self
    }

    pub fn with_tolerance(mut self, tolerance: u32) -> Stimulus {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Stimulus {
        self.reference = Some(reference.into());
        self
    }

    pub fn validate(&self, scale: &RatingScale) -> Result<(), ModelError> {
        match (self.role.has_expected_answer(), self.expected_answer) {
            (true, None) => Err(ModelError::MissingExpectedAnswer(self.id.clone())),
            (false, Some(_)) => Err(ModelError::UnexpectedAnswer(self.id.clone())),
            (true, Some(answer)) => scale.check(answer).map(|_| ()),
            (false, None) => Ok(()),
        }?;
        if self.tolerance.is_some() && self.role != Role::Gold {
            return Err(ModelError::UnexpectedTolerance(self.id.clone()));
        }
        Ok(())
    }
}

/// A test condition and the rating stimuli that belong to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub stimuli: BTreeSet<String>,
    /// Hidden reference of an ACR-HR design.
    pub is_reference: bool,
}

/// Groups rating stimuli into conditions. Stimuli without a label are left out.
pub fn collect_conditions(stimuli: &[Stimulus], reference_label: Option<&str>) -> Vec<Condition> {
    let mut by_label = alloc::collections::BTreeMap::<&str, BTreeSet<String>>::new();
    for s in stimuli.iter().filter(|s| s.role == Role::Rating) {
        if let Some(label) = s.condition.as_deref() {
            by_label.entry(label).or_default().insert(s.id.clone());
        }
    }
    by_label
        .into_iter()
        .map(|(label, stimuli)| Condition {
            label: label.to_owned(),
            stimuli,
            is_reference: Some(label) == reference_label,
        })
        .collect()
}

/// Which clip of a pair was played first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentationOrder {
    ReferenceFirst,
    ProcessedFirst,
}

impl PresentationOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            PresentationOrder::ReferenceFirst => "ref_first",
            PresentationOrder::ProcessedFirst => "proc_first",
        }
    }
}

impl FromStr for PresentationOrder {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ref_first" | "reference_first" => Ok(PresentationOrder::ReferenceFirst),
            "proc_first" | "processed_first" => Ok(PresentationOrder::ProcessedFirst),
            other => Err(ModelError::BadOrder(other.to_owned())),
        }
    }
}

/// One opinion from one worker on one stimulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub stimulus_id: String,
    pub worker_id: String,
    pub session_id: String,
    pub value: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presentation_order: Option<PresentationOrder>,
    pub timestamp: Timestamp,
}

impl Rating {
    pub fn validate(&self, scale: &RatingScale) -> Result<(), ModelError> {
        scale.check(self.value)?;
        match (scale.method, self.presentation_order) {
            (Method::Ccr, None) => Err(ModelError::MissingOrder(self.stimulus_id.clone())),
            (Method::Acr | Method::Dcr, Some(_)) => Err(ModelError::UnexpectedOrder(self.stimulus_id.clone())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Qualification,
    Environment,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::Qualification => "qualification",
            CertificateKind::Environment => "environment",
        }
    }
}

impl FromStr for CertificateKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qualification" => Ok(CertificateKind::Qualification),
            "environment" => Ok(CertificateKind::Environment),
            other => Err(ModelError::BadCertificateKind(other.to_owned())),
        }
    }
}

/// Label produced by [`condition_of`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionLabel {
    Named(String),
    Unconditioned,
}

impl ConditionLabel {
    pub fn name(&self) -> Option<&str> {
        match self {
            ConditionLabel::Named(s) => Some(s),
            ConditionLabel::Unconditioned => None,
        }
    }
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionLabel::Named(s) => f.write_str(s),
            ConditionLabel::Unconditioned => f.write_str("unconditioned"),
        }
    }
}

/// A compiled condition-extraction pattern with exactly one capture group.
#[derive(Debug, Clone)]
pub struct ConditionPattern {
    re: Regex,
}

impl ConditionPattern {
    pub fn new(pattern: &str) -> Result<ConditionPattern, ModelError> {
        let re = Regex::new(pattern).map_err(|e| ModelError::BadPattern(alloc::format!("{e}")))?;
        // captures_len counts the implicit whole-match group
        if re.captures_len() != 2 {
            return Err(ModelError::CaptureGroups(re.captures_len() - 1));
        }
        Ok(ConditionPattern { re })
    }

    pub fn as_str(&self) -> &str {
        self.re.as_str()
    }

    pub fn label(&self, url: &str) -> ConditionLabel {
        self.re
            .captures(url)
            .and_then(|c| c.get(1))
            .map(|m| ConditionLabel::Named(m.as_str().to_owned()))
            .unwrap_or(ConditionLabel::Unconditioned)
    }
}

/// Extracts the condition label of a clip from its URL or file name.
pub fn condition_of(stimulus_url: &str, pattern: &str) -> Result<ConditionLabel, ModelError> {
    Ok(ConditionPattern::new(pattern)?.label(stimulus_url))
}
