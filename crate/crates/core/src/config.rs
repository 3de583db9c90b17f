//! Experiment configuration (JSON, versioned). One document drives the test
//! builder, the HIT app, cleansing and the platform actions.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{ConditionPattern, Method, RatingScale, Role, Stimulus};

pub const CONFIG_VERSION: u32 = 1;

/// Default time-to-live of an environment certificate (30 minutes).
pub const ENVIRONMENT_TTL_SECONDS: u64 = 1800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment_id: String,
    pub method: Method,
    /// Overrides the standard level labels of the method's scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_labels: Option<Vec<String>>,
    #[serde(default)]
    pub sections: Sections,
    #[serde(default = "default_votes_target")]
    pub votes_target: u32,
    #[serde(default = "default_safety_factor")]
    pub safety_factor: f64,
    #[serde(default = "default_prefix_seconds")]
    pub trapping_prefix_seconds: f64,
    #[serde(default = "default_gold_tolerance")]
    pub gold_tolerance: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_pattern: Option<String>,
    /// Hidden-reference condition used as the DMOS baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_condition: Option<String>,
    pub secret: SecretRef,
    #[serde(default)]
    pub pools: Pools,
    #[serde(default)]
    pub filters: Filters,
    #[serde(default)]
    pub certificates: CertificatePolicy,
    #[serde(default)]
    pub payment: Payment,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// Where the experiment secret comes from. Only the reference is stored in
/// the config file; resolving it is up to the caller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SecretRef {
    Env(String),
    Inline(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sections {
    #[serde(default = "default_block")]
    pub rating_block: usize,
    #[serde(default = "yes")]
    pub qualification: bool,
    #[serde(default = "yes")]
    pub environment_test: bool,
    #[serde(default = "yes")]
    pub training: bool,
    #[serde(default = "yes")]
    pub earpods_check: bool,
    #[serde(default = "default_env_pairs")]
    pub environment_pairs: usize,
    /// Maximum digit errors allowed in the hearing test.
    #[serde(default = "default_hearing_errors")]
    pub hearing_max_errors: u32,
}

impl Default for Sections {
    fn default() -> Self {
        Sections {
            rating_block: default_block(),
            qualification: true,
            environment_test: true,
            training: true,
            earpods_check: true,
            environment_pairs: default_env_pairs(),
            hearing_max_errors: default_hearing_errors(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlClip {
    pub url: String,
    pub answer: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvPair {
    pub first: String,
    pub second: String,
    /// 0 when the first clip has the better quality, 1 otherwise.
    pub better: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pools {
    #[serde(default)]
    pub trapping: Vec<ControlClip>,
    #[serde(default)]
    pub gold: Vec<ControlClip>,
    #[serde(default)]
    pub training: Vec<String>,
    #[serde(default = "default_training_id")]
    pub training_set_id: String,
    #[serde(default)]
    pub environment: Vec<EnvPair>,
    /// Answer key of the two-eared headphone check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earpods_answer: Option<String>,
}

/// Filter toggles and thresholds for cleansing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filters {
    #[serde(default = "yes")]
    pub playback: bool,
    #[serde(default = "yes")]
    pub earpods: bool,
    #[serde(default = "yes")]
    pub trapping: bool,
    #[serde(default = "yes")]
    pub environment: bool,
    #[serde(default = "yes")]
    pub gold: bool,
    #[serde(default = "yes")]
    pub variance: bool,
    #[serde(default = "yes")]
    pub qualification: bool,
    #[serde(default = "yes")]
    pub certificate_integrity: bool,
    /// Headset detection only gates usability when enabled here.
    #[serde(default)]
    pub headset: bool,
    #[serde(default = "default_env_threshold")]
    pub environment_pass_threshold: usize,
    #[serde(default = "default_ccr_trap")]
    pub ccr_trapping_accept: Vec<i32>,
    #[serde(default = "default_min_distinct")]
    pub variance_min_distinct: usize,
    #[serde(default)]
    pub variance_min_sd: f64,
    #[serde(default = "default_headset_keywords")]
    pub headset_keywords: Vec<String>,
}

impl Default for Filters {
    fn default() -> Self {
        Filters {
            playback: true,
            earpods: true,
            trapping: true,
            environment: true,
            gold: true,
            variance: true,
            qualification: true,
            certificate_integrity: true,
            headset: false,
            environment_pass_threshold: default_env_threshold(),
            ccr_trapping_accept: default_ccr_trap(),
            variance_min_distinct: default_min_distinct(),
            variance_min_sd: 0.0,
            headset_keywords: default_headset_keywords(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatePolicy {
    #[serde(default = "default_env_ttl")]
    pub environment_ttl_seconds: u64,
    /// Tolerated client clock lead over the submission time.
    #[serde(default = "default_skew")]
    pub clock_skew_seconds: u64,
}

impl Default for CertificatePolicy {
    fn default() -> Self {
        CertificatePolicy {
            environment_ttl_seconds: ENVIRONMENT_TTL_SECONDS,
            clock_skew_seconds: default_skew(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payment {
    /// Bonus per completed accepted session, currency minor units. 0 disables bonuses.
    #[serde(default)]
    pub bonus_minor_units: u64,
    #[serde(default = "default_currency")]
    pub currency: String,
    #[serde(default = "default_bonus_message")]
    pub bonus_message: String,
    #[serde(default = "default_reject_message")]
    pub reject_message: String,
    /// Send a notice to workers whose qualification failed.
    #[serde(default)]
    pub notify_disqualified: bool,
    #[serde(default = "default_notify_message")]
    pub notify_message: String,
}

impl Default for Payment {
    fn default() -> Self {
        Payment {
            bonus_minor_units: 0,
            currency: default_currency(),
            bonus_message: default_bonus_message(),
            reject_message: default_reject_message(),
            notify_disqualified: false,
            notify_message: default_notify_message(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Conditions with fewer usable votes are not reported.
    #[serde(default = "default_min_votes")]
    pub min_votes_per_condition: usize,
    #[serde(default = "default_alpha")]
    pub fisher_alpha: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_votes_per_condition: default_min_votes(),
            fisher_alpha: default_alpha(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_block() -> usize {
    12
}
fn default_env_pairs() -> usize {
    4
}
fn default_hearing_errors() -> u32 {
    2
}
fn default_votes_target() -> u32 {
    5
}
fn default_safety_factor() -> f64 {
    1.3
}
fn default_prefix_seconds() -> f64 {
    3.0
}
fn default_gold_tolerance() -> u32 {
    1
}
fn default_training_id() -> String {
    "training-1".to_string()
}
fn default_env_threshold() -> usize {
    4
}
fn default_ccr_trap() -> Vec<i32> {
    vec![0]
}
fn default_min_distinct() -> usize {
    2
}
fn default_headset_keywords() -> Vec<String> {
    ["headset", "headphone", "earphone", "earbud", "airpods", "buds"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
fn default_env_ttl() -> u64 {
    ENVIRONMENT_TTL_SECONDS
}
fn default_skew() -> u64 {
    300
}
fn default_currency() -> String {
    "USD".to_string()
}
fn default_bonus_message() -> String {
    "Thank you for completing the rating session.".to_string()
}
fn default_reject_message() -> String {
    "Submission did not pass the quality checks".to_string()
}
fn default_notify_message() -> String {
    "There are no more assignments that match your profile.".to_string()
}
fn default_min_votes() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    /// A config with all defaults for the given method.
    pub fn new(experiment_id: impl Into<String>, method: Method, secret: SecretRef) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            experiment_id: experiment_id.into(),
            method,
            scale_labels: None,
            sections: Sections::default(),
            votes_target: default_votes_target(),
            safety_factor: default_safety_factor(),
            trapping_prefix_seconds: default_prefix_seconds(),
            gold_tolerance: default_gold_tolerance(),
            condition_pattern: None,
            reference_condition: None,
            secret,
            pools: Pools::default(),
            filters: Filters::default(),
            certificates: CertificatePolicy::default(),
            payment: Payment::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn scale(&self) -> RatingScale {
        let mut scale = RatingScale::for_method(self.method);
        if let Some(labels) = &self.scale_labels {
            scale.labels = labels.clone();
        }
        scale
    }

    /// Sessions each rating clip should appear in.
    pub fn sessions_per_clip(&self) -> usize {
        libm::ceil(self.votes_target as f64 * self.safety_factor - 1e-9) as usize
    }

    pub fn condition_pattern(&self) -> Result<Option<ConditionPattern>, ConfigError> {
        self.condition_pattern
            .as_deref()
            .map(ConditionPattern::new)
            .transpose()
            .map_err(ConfigError::from)
    }

    pub fn trapping_stimuli(&self) -> Vec<Stimulus> {
        self.pools
            .trapping
            .iter()
            .map(|c| control_stimulus(c, Role::Trapping, None))
            .collect()
    }

    pub fn gold_stimuli(&self) -> Vec<Stimulus> {
        self.pools
            .gold
            .iter()
            .map(|c| control_stimulus(c, Role::Gold, Some(c.tolerance.unwrap_or(self.gold_tolerance))))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        let scale = self.scale();
        scale.validate()?;
        if self.sections.rating_block == 0 {
            return invalid("sections.rating_block must be positive");
        }
        if self.votes_target == 0 {
            return invalid("votes_target must be positive");
        }
        if !(self.safety_factor >= 1.0 && self.safety_factor.is_finite()) {
            return invalid("safety_factor must be >= 1");
        }
        if !(self.trapping_prefix_seconds > 0.0 && self.trapping_prefix_seconds.is_finite()) {
            return invalid("trapping_prefix_seconds must be positive");
        }
        if self.filters.environment_pass_threshold > self.sections.environment_pairs {
            return invalid("filters.environment_pass_threshold exceeds the number of environment pairs");
        }
        if self.filters.variance_min_distinct == 0 {
            return invalid("filters.variance_min_distinct must be at least 1");
        }
        if self.filters.variance_min_sd.is_nan() || self.filters.variance_min_sd < 0.0 {
            return invalid("filters.variance_min_sd must be non-negative");
        }
        if self.filters.ccr_trapping_accept.is_empty() {
            return invalid("filters.ccr_trapping_accept must not be empty");
        }
        for v in &self.filters.ccr_trapping_accept {
            RatingScale::for_method(Method::Ccr).check(*v)?;
        }
        if !(self.analysis.fisher_alpha > 0.0 && self.analysis.fisher_alpha < 1.0) {
            return invalid("analysis.fisher_alpha must be in (0, 1)");
        }
        for c in self.trapping_stimuli().iter().chain(self.gold_stimuli().iter()) {
            c.validate(&scale)?;
        }
        if self.method.is_paired() {
            for c in &self.pools.gold {
                if c.reference_url.is_none() {
                    return invalid("gold clips of paired methods need a reference_url");
                }
            }
        }
        for p in &self.pools.environment {
            if p.better > 1 {
                return invalid("environment pair `better` must be 0 or 1");
            }
        }
        if self.sections.environment_test
            && !self.pools.environment.is_empty()
            && self.pools.environment.len() != self.sections.environment_pairs
        {
            return invalid("environment pool size differs from sections.environment_pairs");
        }
        self.condition_pattern()?;
        Ok(())
    }
}

fn control_stimulus(c: &ControlClip, role: Role, tolerance: Option<u32>) -> Stimulus {
    let mut s = Stimulus::new(c.url.clone(), role).with_expected(c.answer);
    s.tolerance = tolerance;
    s.reference = c.reference_url.clone();
    s
}
