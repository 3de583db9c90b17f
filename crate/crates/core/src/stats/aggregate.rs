//! Per-stimulus and per-condition opinion-score aggregates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dist::student_t_quantile;
use crate::error::StatsError;
use crate::model::{PresentationOrder, Rating};

/// Mean opinion score with its spread. `sd` and `ci95` are `None` when the
/// group holds a single vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub key: String,
    pub mos: f64,
    pub sd: Option<f64>,
    pub n: usize,
    pub ci95: Option<f64>,
}

impl Aggregate {
    /// Summarises one group of values. Returns `None` for an empty group.
    pub fn from_values(key: impl Into<String>, values: &[f64]) -> Option<Aggregate> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let (sd, ci95) = if n >= 2 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = libm::sqrt(ss / (n - 1) as f64);
            let t = student_t_quantile(0.975, (n - 1) as f64);
            (Some(sd), Some(t * sd / libm::sqrt(n as f64)))
        } else {
            (None, None)
        };
        Some(Aggregate {
            key: key.into(),
            mos: mean,
            sd,
            n,
            ci95,
        })
    }
}

/// How ratings are grouped before averaging.
#[derive(Debug, Clone, Copy)]
pub enum GroupBy<'a> {
    Stimulus,
    /// Stimulus id to condition label. Ratings of unmapped stimuli are ignored.
    Condition(&'a BTreeMap<String, String>),
}

impl GroupBy<'_> {
    pub(crate) fn key<'r>(&'r self, stimulus_id: &'r str) -> Option<&'r str> {
        match self {
            GroupBy::Stimulus => Some(stimulus_id),
            GroupBy::Condition(map) => map.get(stimulus_id).map(String::as_str),
        }
    }

    fn expected_keys(&self) -> Vec<&str> {
        match self {
            GroupBy::Stimulus => Vec::new(),
            GroupBy::Condition(map) => {
                let mut v: Vec<&str> = map.values().map(String::as_str).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

/// Aggregates in key order, plus the keys that were left out because they
/// had fewer than `min_votes` votes (including none).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregation {
    pub aggregates: Vec<Aggregate>,
    pub omitted: Vec<String>,
}

impl Aggregation {
    pub fn get(&self, key: &str) -> Option<&Aggregate> {
        self.aggregates
            .binary_search_by(|a| a.key.as_str().cmp(key))
            .ok()
            .map(|i| &self.aggregates[i])
    }

    pub fn mos_map(&self) -> BTreeMap<String, f64> {
        self.aggregates.iter().map(|a| (a.key.clone(), a.mos)).collect()
    }
}

fn summarize(groups: BTreeMap<&str, Vec<f64>>, expected: Vec<&str>, min_votes: usize) -> Aggregation {
    let mut out = Aggregation::default();
    for key in expected {
        if !groups.contains_key(key) {
            out.omitted.push(key.to_string());
        }
    }
    for (key, values) in groups {
        if values.len() < min_votes.max(1) {
            out.omitted.push(key.to_string());
            continue;
        }
        if let Some(a) = Aggregate::from_values(key, &values) {
            out.aggregates.push(a);
        }
    }
    out.omitted.sort();
    out
}

/// Mean opinion scores per stimulus or per condition.
pub fn aggregate(ratings: &[Rating], group_by: GroupBy<'_>, min_votes: usize) -> Aggregation {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratings {
        if let Some(k) = group_by.key(&r.stimulus_id) {
            groups.entry(k).or_default().push(r.value as f64);
        }
    }
    summarize(groups, group_by.expected_keys(), min_votes)
}

/// Differential MOS of every condition against the reference condition.
pub fn dmos(conditions: &Aggregation, reference: &str) -> Result<Vec<(String, f64)>, StatsError> {
    let base = conditions
        .get(reference)
        .ok_or_else(|| StatsError::MissingReference(reference.to_string()))?
        .mos;
    Ok(conditions
        .aggregates
        .iter()
        .map(|a| {
            let d = if a.key == reference { 0.0 } else { a.mos - base };
            (a.key.clone(), d)
        })
        .collect())
}

/// DMOS from a plain label to MOS map.
pub fn dmos_map(mos: &BTreeMap<String, f64>, reference: &str) -> Result<BTreeMap<String, f64>, StatsError> {
    let base = *mos
        .get(reference)
        .ok_or_else(|| StatsError::MissingReference(reference.to_string()))?;
    Ok(mos
        .iter()
        .map(|(k, v)| (k.clone(), if k == reference { 0.0 } else { v - base }))
        .collect())
}

/// A CCR vote expressed as "processed relative to reference".
pub fn normalized_ccr(value: i32, order: PresentationOrder) -> i32 {
    match order {
        PresentationOrder::ReferenceFirst => value,
        PresentationOrder::ProcessedFirst => -value,
    }
}

/// Comparison MOS: order-normalised CCR votes averaged per group.
pub fn cmos(ratings: &[Rating], group_by: GroupBy<'_>, min_votes: usize) -> Result<Aggregation, StatsError> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratings {
        let order = r
            .presentation_order
            .ok_or_else(|| StatsError::MissingOrder(r.stimulus_id.clone()))?;
        if let Some(k) = group_by.key(&r.stimulus_id) {
            groups.entry(k).or_default().push(normalized_ccr(r.value, order) as f64);
        }
    }
    Ok(summarize(groups, group_by.expected_keys(), min_votes))
}
