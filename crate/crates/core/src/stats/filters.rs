//! Cross-run reliability, and the effect of each screening criterion on it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{aggregate, cmos, dmos_map, fisher_z_test, icc_2_1, pcc, srcc, FisherZ, GroupBy, RunMatrix};
use crate::cleansing::{split_by_criterion, CleansingVerdict, Grouping};
use crate::config::AnalysisConfig;
use crate::error::StatsError;
use crate::ingest::Submission;
use crate::model::{Method, Rating};

/// Per-condition scores of one run: MOS, or CMOS for CCR.
pub fn condition_scores(
    ratings: &[Rating],
    conditions: &BTreeMap<String, String>,
    method: Method,
    min_votes: usize,
) -> Result<BTreeMap<String, f64>, StatsError> {
    let agg = match method {
        Method::Ccr => cmos(ratings, GroupBy::Condition(conditions), min_votes)?,
        _ => aggregate(ratings, GroupBy::Condition(conditions), min_votes),
    };
    Ok(agg.mos_map())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPair {
    pub a: usize,
    pub b: usize,
    pub pcc: f64,
    pub srcc: f64,
}

/// Agreement between runs on the conditions they all scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub conditions: Vec<String>,
    pub icc_mos: f64,
    pub icc_mos_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icc_dmos: Option<f64>,
    pub mean_pcc: f64,
    pub mean_srcc: f64,
    pub pairs: Vec<RunPair>,
}

/// ICC(2,1) over runs, plus PCC and SRCC averaged over all run pairs. DMOS
/// is added when `reference` is scored in every run.
pub fn compare_runs(runs: &[BTreeMap<String, f64>], reference: Option<&str>) -> Result<RunComparison, StatsError> {
    if runs.len() < 2 {
        return Err(StatsError::TooFewRuns {
            needed: 2,
            got: runs.len(),
        });
    }
    let common: Vec<String> = runs[0]
        .keys()
        .filter(|k| runs[1..].iter().all(|r| r.contains_key(*k)))
        .cloned()
        .collect();
    if common.len() < 3 {
        return Err(StatsError::TooFew {
            needed: 3,
            got: common.len(),
        });
    }
    let columns: Vec<Vec<f64>> = runs.iter().map(|r| common.iter().map(|c| r[c]).collect()).collect();
    let icc = icc_2_1(&RunMatrix::from_columns(&columns)?);

    let icc_dmos = match reference {
        Some(reference) if common.iter().any(|c| c == reference) => {
            let cols = runs
                .iter()
                .map(|r| {
                    let sub: BTreeMap<String, f64> = common.iter().map(|c| (c.clone(), r[c])).collect();
                    dmos_map(&sub, reference).map(|d| d.into_values().collect())
                })
                .collect::<Result<Vec<Vec<f64>>, _>>()?;
            Some(icc_2_1(&RunMatrix::from_columns(&cols)?).icc)
        }
        _ => None,
    };

    let mut pairs = Vec::new();
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            pairs.push(RunPair {
                a,
                b,
                pcc: pcc(&columns[a], &columns[b])?,
                srcc: srcc(&columns[a], &columns[b])?,
            });
        }
    }
    let np = pairs.len() as f64;
    Ok(RunComparison {
        conditions: common,
        icc_mos: icc.icc,
        icc_mos_degenerate: icc.degenerate,
        icc_dmos,
        mean_pcc: pairs.iter().map(|p| p.pcc).sum::<f64>() / np,
        mean_srcc: pairs.iter().map(|p| p.srcc).sum::<f64>() / np,
        pairs,
    })
}

/// One screened run: its submissions and their verdicts.
#[derive(Debug, Clone, Copy)]
pub struct ScreenedRun<'a> {
    pub submissions: &'a [Submission],
    pub verdicts: &'a [CleansingVerdict],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnalysis {
    /// Submissions in the group, summed over runs.
    pub submissions: usize,
    pub comparison: RunComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAnalysis {
    pub grouping: Grouping,
    pub passed: GroupAnalysis,
    pub failed: GroupAnalysis,
    /// Passed versus failed mean PCC, n = number of conditions per group.
    pub pcc_test: FisherZ,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srcc_test: Option<FisherZ>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub grouping: Grouping,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterAnalysis {
    pub runs: usize,
    pub analyzed: Vec<CriterionAnalysis>,
    pub skipped: Vec<Skipped>,
}

fn group_scores(
    runs: &[ScreenedRun<'_>],
    failed: bool,
    grouping: Grouping,
    conditions: &BTreeMap<String, String>,
    method: Method,
    min_votes: usize,
) -> Result<(usize, Vec<BTreeMap<String, f64>>), StatsError> {
    let mut total = 0;
    let mut scores = Vec::with_capacity(runs.len());
    for run in runs {
        let split = split_by_criterion(run.verdicts, grouping);
        let group = if failed { &split.failed } else { &split.passed };
        let ids: BTreeSet<&str> = group.iter().map(String::as_str).collect();
        total += ids.len();
        let ratings: Vec<Rating> = run
            .submissions
            .iter()
            .filter(|s| ids.contains(s.assignment_id.as_str()))
            .flat_map(Submission::to_ratings)
            .collect();
        scores.push(condition_scores(&ratings, conditions, method, min_votes)?);
    }
    Ok((total, scores))
}

/// For each grouping, splits every run's accepted submissions into passed and
/// failed groups and compares the groups' cross-run reliability. Groupings
/// whose failed group cannot be scored are skipped with a reason.
pub fn analyze_filters(
    runs: &[ScreenedRun<'_>],
    groupings: &[Grouping],
    conditions: &BTreeMap<String, String>,
    method: Method,
    reference: Option<&str>,
    config: &AnalysisConfig,
) -> Result<FilterAnalysis, StatsError> {
    if runs.len() < 2 {
        return Err(StatsError::TooFewRuns {
            needed: 2,
            got: runs.len(),
        });
    }
    let mut out = FilterAnalysis {
        runs: runs.len(),
        ..FilterAnalysis::default()
    };
    let min_votes = config.min_votes_per_condition;
    for &grouping in groupings {
        let analyze = |failed: bool| -> Result<GroupAnalysis, String> {
            let (submissions, scores) =
                group_scores(runs, failed, grouping, conditions, method, min_votes).map_err(|e| format!("{e}"))?;
            if submissions == 0 {
                return Err(String::from("empty group"));
            }
            let comparison = compare_runs(&scores, reference).map_err(|e| format!("{e}"))?;
            Ok(GroupAnalysis {
                submissions,
                comparison,
            })
        };
        let result = analyze(false)
            .map_err(|e| format!("passed group: {e}"))
            .and_then(|p| Ok((p, analyze(true).map_err(|e| format!("failed group: {e}"))?)))
            .and_then(|(passed, failed)| {
                let (np, nf) = (passed.comparison.conditions.len(), failed.comparison.conditions.len());
                let pcc_test = fisher_z_test(
                    passed.comparison.mean_pcc,
                    np,
                    failed.comparison.mean_pcc,
                    nf,
                    config.fisher_alpha,
                )
                .map_err(|e| format!("fisher-z: {e}"))?;
                let srcc_test = fisher_z_test(
                    passed.comparison.mean_srcc,
                    np,
                    failed.comparison.mean_srcc,
                    nf,
                    config.fisher_alpha,
                )
                .ok();
                Ok(CriterionAnalysis {
                    grouping,
                    passed,
                    failed,
                    pcc_test,
                    srcc_test,
                })
            });
        match result {
            Ok(a) => out.analyzed.push(a),
            Err(reason) => out.skipped.push(Skipped { grouping, reason }),
        }
    }
    Ok(out)
}
