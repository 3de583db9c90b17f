//! Per-worker histories rebuilt from a batch of submissions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::answers::{QualificationRecord, Submission};

/// Something odd in a worker's history. Anomalies are recorded, never fatal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    /// More than one submission carried the qualification section.
    DuplicateQualification { assignments: Vec<String> },
    /// The same session was submitted more than once.
    DuplicateSession {
        session_id: String,
        assignments: Vec<String>,
    },
    /// A stimulus rated again in a later session; `assignment` is the repeat.
    RepeatedStimulus { stimulus: String, assignment: String },
    /// Submissions came from more than one browser.
    MultipleFingerprints { fingerprints: Vec<String> },
}

impl Anomaly {
    /// Fraud signals void the worker's certificates.
    pub fn is_fraud_signal(&self) -> bool {
        matches!(
            self,
            Anomaly::DuplicateQualification { .. } | Anomaly::MultipleFingerprints { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerHistory {
    pub worker_id: String,
    /// Assignment ids ordered by submit time (ties by assignment id).
    pub submissions: Vec<String>,
    /// Position in `submissions` of the first qualification-bearing one.
    pub qualification_index: Option<usize>,
    pub qualification: Option<QualificationRecord>,
    /// Distinct certificate tokens in order of first appearance.
    pub certificates: Vec<String>,
    pub anomalies: Vec<Anomaly>,
}

impl WorkerHistory {
    pub fn qualified(&self) -> bool {
        self.qualification.as_ref().is_some_and(QualificationRecord::passed)
    }

    pub fn has_fraud_signal(&self) -> bool {
        self.anomalies.iter().any(Anomaly::is_fraud_signal)
    }

    /// Stimuli of `assignment` that the worker had already rated earlier.
    pub fn repeated_in(&self, assignment: &str) -> BTreeSet<&str> {
        self.anomalies
            .iter()
            .filter_map(|a| match a {
                Anomaly::RepeatedStimulus {
                    stimulus,
                    assignment: x,
                } if x == assignment => Some(stimulus.as_str()),
                _ => None,
            })
            .collect()
    }
}

pub fn reconstruct_sessions(subs: &[Submission]) -> BTreeMap<String, WorkerHistory> {
    let mut by_worker: BTreeMap<&str, Vec<&Submission>> = BTreeMap::new();
    for s in subs {
        by_worker.entry(&s.worker_id).or_default().push(s);
    }
    by_worker
        .into_iter()
        .map(|(worker, mut list)| {
            list.sort_by(|a, b| (a.submit_time, &a.assignment_id).cmp(&(b.submit_time, &b.assignment_id)));
            (String::from(worker), history_of(worker, &list))
        })
        .collect()
}

fn history_of(worker: &str, list: &[&Submission]) -> WorkerHistory {
    let mut anomalies = Vec::new();

    let quals: Vec<usize> = (0..list.len()).filter(|&i| list[i].qualification.is_some()).collect();
    if quals.len() > 1 {
        anomalies.push(Anomaly::DuplicateQualification {
            assignments: quals.iter().map(|&i| list[i].assignment_id.clone()).collect(),
        });
    }

    let mut sessions: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for s in list {
        sessions.entry(&s.session_id).or_default().push(s.assignment_id.clone());
    }
    for (session_id, assignments) in sessions {
        if assignments.len() > 1 {
            anomalies.push(Anomaly::DuplicateSession {
                session_id: session_id.into(),
                assignments,
            });
        }
    }

    let mut rated = BTreeSet::new();
    for s in list {
        for r in &s.ratings {
            if !rated.insert(r.clip.as_str()) {
                anomalies.push(Anomaly::RepeatedStimulus {
                    stimulus: r.clip.clone(),
                    assignment: s.assignment_id.clone(),
                });
            }
        }
    }

    let fingerprints: BTreeSet<&str> = list
        .iter()
        .map(|s| s.client_fingerprint.as_str())
        .filter(|f| !f.is_empty())
        .collect();
    if fingerprints.len() > 1 {
        anomalies.push(Anomaly::MultipleFingerprints {
            fingerprints: fingerprints.into_iter().map(String::from).collect(),
        });
    }

    let mut certificates: Vec<String> = Vec::new();
    for s in list {
        for t in &s.certificates {
            if !certificates.contains(t) {
                certificates.push(t.clone());
            }
        }
    }

    WorkerHistory {
        worker_id: worker.into(),
        submissions: list.iter().map(|s| s.assignment_id.clone()).collect(),
        qualification_index: quals.first().copied(),
        qualification: quals.first().and_then(|&i| list[i].qualification.clone()),
        certificates,
        anomalies,
    }
}
