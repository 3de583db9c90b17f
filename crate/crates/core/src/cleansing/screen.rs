use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::checks::{check_submission, CleansingVerdict};
use super::criteria::{Criterion, Flag, Grouping};
use crate::certificate::CertificateKey;
use crate::config::ExperimentConfig;
use crate::ingest::{Anomaly, Submission, WorkerHistory};
use crate::model::Rating;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleansingReport {
    pub submissions: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub usable: usize,
    /// Accepted over submitted; 0 for an empty batch.
    pub approval_rate: f64,
    pub usable_rate: f64,
    pub fail_counts: BTreeMap<Criterion, usize>,
    pub not_applicable_counts: BTreeMap<Criterion, usize>,
    pub headset_detected: usize,
    pub headset_detection_rate: f64,
    pub usable_ratings: usize,
    /// Ratings of stimuli the worker had already rated in an earlier session.
    pub repeated_ratings_dropped: usize,
    pub workers: usize,
    pub anomalies: BTreeMap<String, Vec<Anomaly>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRef {
    pub assignment_id: String,
    pub worker_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub assignment_id: String,
    pub worker_id: String,
    pub reasons: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BonusGrant {
    pub assignment_id: String,
    pub worker_id: String,
    pub amount_minor_units: u64,
}

/// Accepted and rejected submissions and assigned bonuses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UtilityReport {
    pub accepted: Vec<AssignmentRef>,
    pub rejected: Vec<Rejection>,
    pub bonuses: Vec<BonusGrant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screening {
    /// Ordered by assignment id.
    pub verdicts: Vec<CleansingVerdict>,
    /// Ratings of usable submissions; control questions never appear here.
    pub usable_ratings: Vec<Rating>,
    pub report: CleansingReport,
    pub utility: UtilityReport,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn screen_batch(
    subs: &[Submission],
    histories: &BTreeMap<String, WorkerHistory>,
    config: &ExperimentConfig,
    key: &CertificateKey,
) -> Screening {
    let mut order: Vec<&Submission> = subs.iter().collect();
    order.sort_by(|a, b| a.assignment_id.cmp(&b.assignment_id));

    let mut verdicts = Vec::with_capacity(order.len());
    let mut usable_ratings = Vec::new();
    let mut dropped = 0;
    let mut utility = UtilityReport::default();
    let mut fail_counts: BTreeMap<Criterion, usize> = Criterion::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut na_counts = fail_counts.clone();

    for sub in order {
        let history = histories.get(&sub.worker_id);
        let v = check_submission(sub, history, config, key);
        for (c, f) in v.criteria.iter() {
            match f {
                Flag::Fail => *fail_counts.entry(c).or_default() += 1,
                Flag::NotApplicable => *na_counts.entry(c).or_default() += 1,
                Flag::Pass => {}
            }
        }
        if v.ratings_usable {
            let repeated = history.map(|h| h.repeated_in(&sub.assignment_id)).unwrap_or_default();
            for r in sub.to_ratings() {
                if repeated.contains(r.stimulus_id.as_str()) {
                    dropped += 1;
                } else {
                    usable_ratings.push(r);
                }
            }
        }
        let who = |v: &CleansingVerdict| (v.assignment_id.clone(), v.worker_id.clone());
        if v.accepted {
            let (assignment_id, worker_id) = who(&v);
            utility.accepted.push(AssignmentRef {
                assignment_id,
                worker_id,
            });
        } else {
            let (assignment_id, worker_id) = who(&v);
            utility.rejected.push(Rejection {
                assignment_id,
                worker_id,
                reasons: v.rejection_reasons(config),
            });
        }
        if v.bonus_due && config.payment.bonus_minor_units > 0 {
            let (assignment_id, worker_id) = who(&v);
            utility.bonuses.push(BonusGrant {
                assignment_id,
                worker_id,
                amount_minor_units: config.payment.bonus_minor_units,
            });
        }
        verdicts.push(v);
    }

    let n = verdicts.len();
    let accepted = utility.accepted.len();
    let usable = verdicts.iter().filter(|v| v.ratings_usable).count();
    let headset = verdicts
        .iter()
        .filter(|v| v.criteria.get(Criterion::Headset) == Flag::Pass)
        .count();
    let report = CleansingReport {
        submissions: n,
        accepted,
        rejected: n - accepted,
        usable,
        approval_rate: rate(accepted, n),
        usable_rate: rate(usable, n),
        fail_counts,
        not_applicable_counts: na_counts,
        headset_detected: headset,
        headset_detection_rate: rate(headset, n),
        usable_ratings: usable_ratings.len(),
        repeated_ratings_dropped: dropped,
        workers: histories.len(),
        anomalies: histories
            .iter()
            .filter(|(_, h)| !h.anomalies.is_empty())
            .map(|(w, h)| (w.clone(), h.anomalies.clone()))
            .collect(),
    };
    Screening {
        verdicts,
        usable_ratings,
        report,
        utility,
    }
}

/// Passed and failed groups, as assignment ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
}

/// Partitions the accepted submissions by one criterion. A not-applicable
/// flag counts as passed.
pub fn split_by_criterion(verdicts: &[CleansingVerdict], grouping: Grouping) -> Split {
    let mut out = Split::default();
    for v in verdicts.iter().filter(|v| v.accepted) {
        let pass = match grouping {
            Grouping::Criterion(c) => v.criteria.get(c).ok(),
            Grouping::AllFilters => v.ratings_usable,
        };
        if pass {
            out.passed.push(v.assignment_id.clone());
        } else {
            out.failed.push(v.assignment_id.clone());
        }
    }
    out
}
