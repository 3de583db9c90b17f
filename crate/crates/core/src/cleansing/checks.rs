//! Per-submission checks. Each criterion is computed on its own; combining
//! them is left to [`decide`].

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::criteria::{decide, Criterion, CriterionFlags, Flag};
use crate::certificate::{live_certificates, tokens_intact, CertificateKey};
use crate::config::ExperimentConfig;
use crate::ingest::{Submission, WorkerHistory};
use crate::model::{CertificateKind, Method, PresentationOrder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleansingVerdict {
    pub assignment_id: String,
    pub worker_id: String,
    pub session_id: String,
    pub accepted: bool,
    pub ratings_usable: bool,
    pub criteria: CriterionFlags,
    pub bonus_due: bool,
}

impl CleansingVerdict {
    /// Enabled criteria that failed, in canonical order.
    pub fn failed_criteria(&self, config: &ExperimentConfig) -> Vec<Criterion> {
        Criterion::ALL
            .into_iter()
            .filter(|c| c.enabled(&config.filters) && self.criteria.get(*c) == Flag::Fail)
            .collect()
    }

    /// Failed acceptance criteria, the reason for a rejection.
    pub fn rejection_reasons(&self, config: &ExperimentConfig) -> Vec<Criterion> {
        self.failed_criteria(config)
            .into_iter()
            .filter(|c| Criterion::ACCEPTANCE.contains(c))
            .collect()
    }
}

fn playback(sub: &Submission) -> Flag {
    Flag::from_bool(sub.playback_complete())
}

fn earpods(sub: &Submission, config: &ExperimentConfig) -> Flag {
    if !config.sections.earpods_check {
        return Flag::NotApplicable;
    }
    match (&sub.earpods, &config.pools.earpods_answer) {
        (None, _) => Flag::Fail,
        (Some(e), Some(key)) => Flag::from_bool(e.answer.trim().eq_ignore_ascii_case(key.trim())),
        (Some(e), None) => Flag::from_bool(e.passed),
    }
}

fn trapping(sub: &Submission, config: &ExperimentConfig) -> Flag {
    let Some(answer) = sub.trapping.answer else {
        return Flag::Fail;
    };
    if sub.method == Method::Ccr {
        return Flag::from_bool(config.filters.ccr_trapping_accept.contains(&answer));
    }
    let expected = config
        .pools
        .trapping
        .iter()
        .find(|c| c.url == sub.trapping.clip)
        .map_or(sub.trapping.expected, |c| c.answer);
    Flag::from_bool(answer == expected)
}

fn environment(sub: &Submission, config: &ExperimentConfig, key: &CertificateKey) -> Flag {
    if !config.sections.environment_test {
        return Flag::NotApplicable;
    }
    let mut live = live_certificates(
        &sub.certificates,
        CertificateKind::Environment,
        key,
        &sub.worker_id,
        sub.submit_time,
        config.certificates.clock_skew_seconds,
    );
    if live.next().is_some() {
        return Flag::Pass;
    }
    let Some(test) = &sub.env_test else {
        return Flag::Fail;
    };
    let pool = &config.pools.environment;
    if !pool.is_empty() && test.answers.len() == pool.len() {
        let correct = test
            .answers
            .iter()
            .zip(pool)
            .filter(|(a, p)| **a == Some(p.better))
            .count();
        Flag::from_bool(correct >= config.filters.environment_pass_threshold)
    } else {
        Flag::from_bool(test.passed)
    }
}

fn gold(sub: &Submission, config: &ExperimentConfig) -> Flag {
    let Some(answer) = sub.gold.answer else {
        return Flag::Fail;
    };
    let pooled = config.pools.gold.iter().find(|c| c.url == sub.gold.clip);
    let expected = match pooled {
        Some(c) if sub.method == Method::Ccr && sub.gold.order == Some(PresentationOrder::ProcessedFirst) => -c.answer,
        Some(c) => c.answer,
        None => sub.gold.expected,
    };
    let tolerance = pooled
        .and_then(|c| c.tolerance)
        .or(sub.gold.tolerance)
        .unwrap_or(config.gold_tolerance);
    Flag::from_bool(answer.abs_diff(expected) <= tolerance)
}

fn variance(sub: &Submission, config: &ExperimentConfig) -> Flag {
    let values: Vec<i32> = sub.ratings.iter().filter_map(|r| r.value).collect();
    let distinct = values.iter().collect::<BTreeSet<_>>().len();
    let min_sd = config.filters.variance_min_sd;
    let sd_ok = min_sd <= 0.0 || {
        let n = values.len() as f64;
        let mean = values.iter().map(|v| *v as f64).sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (*v as f64 - mean) * (*v as f64 - mean)).sum();
        values.len() >= 2 && libm::sqrt(ss / (n - 1.0)) >= min_sd
    };
    Flag::from_bool(distinct >= config.filters.variance_min_distinct && sd_ok)
}

fn qualification(config: &ExperimentConfig, history: Option<&WorkerHistory>) -> Flag {
    if !config.sections.qualification {
        return Flag::NotApplicable;
    }
    Flag::from_bool(history.is_some_and(WorkerHistory::qualified))
}

fn certificate_integrity(sub: &Submission, history: Option<&WorkerHistory>, key: &CertificateKey) -> Flag {
    let intact = tokens_intact(&sub.certificates, key, &sub.worker_id);
    let fraud = history.is_some_and(WorkerHistory::has_fraud_signal);
    Flag::from_bool(intact && !fraud)
}

/// Case-insensitive keyword match over the detected device names; an empty
/// device list means detection was unavailable.
pub fn headset_flag(devices: &[String], keywords: &[String]) -> Flag {
    if devices.is_empty() {
        return Flag::NotApplicable;
    }
    let hit = devices.iter().any(|d| {
        let d = d.to_lowercase();
        keywords.iter().any(|k| d.contains(&k.to_lowercase()))
    });
    Flag::from_bool(hit)
}

/// Acceptance criteria and the resulting payment decision.
pub fn check_acceptance(sub: &Submission, config: &ExperimentConfig) -> (bool, CriterionFlags) {
    let flags: CriterionFlags = [
        (Criterion::Playback, playback(sub)),
        (Criterion::Earpods, earpods(sub, config)),
        (Criterion::Trapping, trapping(sub, config)),
    ]
    .into_iter()
    .collect();
    let (accepted, _) = decide(&flags, &config.filters);
    (accepted, flags)
}

/// Usability criteria plus the headset flag. `usable` also requires
/// acceptance, so a rejected submission is never usable.
pub fn check_usability(
    sub: &Submission,
    history: Option<&WorkerHistory>,
    config: &ExperimentConfig,
    key: &CertificateKey,
) -> (bool, CriterionFlags) {
    let verdict = check_submission(sub, history, config, key);
    (verdict.ratings_usable, verdict.criteria)
}

/// Full verdict for one submission.
pub fn check_submission(
    sub: &Submission,
    history: Option<&WorkerHistory>,
    config: &ExperimentConfig,
    key: &CertificateKey,
) -> CleansingVerdict {
    let (_, mut flags) = check_acceptance(sub, config);
    flags.set(Criterion::Environment, environment(sub, config, key));
    flags.set(Criterion::Gold, gold(sub, config));
    flags.set(Criterion::Variance, variance(sub, config));
    flags.set(Criterion::Qualification, qualification(config, history));
    flags.set(
        Criterion::CertificateIntegrity,
        certificate_integrity(sub, history, key),
    );
    flags.set(
        Criterion::Headset,
        headset_flag(&sub.detected_devices, &config.filters.headset_keywords),
    );
    let (accepted, usable) = decide(&flags, &config.filters);
    CleansingVerdict {
        assignment_id: sub.assignment_id.clone(),
        worker_id: sub.worker_id.clone(),
        session_id: sub.session_id.clone(),
        accepted,
        ratings_usable: usable,
        criteria: flags,
        bonus_due: accepted && sub.is_complete(),
    }
}
