//! The pipeline stages as in-memory functions, each paired with a writer
//! that lays its outputs out in a directory. The CLI is a thin shell around
//! these; tests drive them directly.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use p808_core::builder::{build_test_plan, emit_input_rows, render_hit_app, AppBundle, Templates, TestPlan};
use p808_core::certificate::CertificateKey;
use p808_core::cleansing::{screen_batch, Grouping, Screening};
use p808_core::config::ExperimentConfig;
use p808_core::ingest::{parse_answer_batch, reconstruct_sessions, submissions_to_table, ParseReport, Submission};
use p808_core::model::{Method, Rating, Stimulus, Timestamp};
use p808_core::platform::{plan_actions, ActionKind, PlatformAction};
use p808_core::simulator::{simulate_run, synthesize_population, LatentQuality, PopulationSpec, RunSpec};
use p808_core::stats::{
    aggregate, analyze_filters, cmos, compare_runs, dmos_map, fit_mapping, pcc, rmse, srcc, Aggregation,
    FilterAnalysis, GroupBy, MappingModel, RunComparison, ScreenedRun,
};
use p808_core::table::Table;
use serde::Serialize;

use crate::io::{num, opt_num, ratings_table, verdicts_table, write_csv, write_file, write_json};

pub struct BuildOutput {
    pub config: ExperimentConfig,
    pub plan: TestPlan,
    pub input_rows: Table,
    pub bundle: AppBundle,
}

pub fn build(
    clips: &[Stimulus],
    config: &ExperimentConfig,
    key: &CertificateKey,
    seed: u64,
    build_timestamp: Option<u64>,
) -> Result<BuildOutput> {
    let plan = build_test_plan(clips, config, seed)?;
    let input_rows = emit_input_rows(&plan);
    let bundle = render_hit_app(config, key, &Templates::default(), build_timestamp)?;
    Ok(BuildOutput {
        config: config.clone(),
        plan,
        input_rows,
        bundle,
    })
}

/// `plan.json`, `input.csv`, `config.json` (the post-processing config) and
/// the app under `app/`.
pub fn write_build(dir: &Path, out: &BuildOutput) -> Result<()> {
    write_json(&dir.join("plan.json"), &out.plan)?;
    write_csv(&dir.join("input.csv"), &out.input_rows)?;
    write_json(&dir.join("config.json"), &out.config)?;
    for (name, body) in &out.bundle.files {
        write_file(&dir.join("app").join(name), body.as_bytes())?;
    }
    Ok(())
}

/// Stimulus-to-condition map: from a plan when one is given, otherwise by
/// applying the config's condition pattern to the stimulus ids.
pub fn condition_map<'a>(
    plan: Option<&TestPlan>,
    config: &ExperimentConfig,
    stimuli: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, String>> {
    if let Some(plan) = plan {
        return Ok(plan.condition_map());
    }
    let Some(pattern) = config.condition_pattern()? else {
        return Ok(BTreeMap::new());
    };
    Ok(stimuli
        .into_iter()
        .filter_map(|s| pattern.label(s).name().map(|l| (s.to_string(), l.to_string())))
        .collect())
}

pub struct SimulateInput<'a> {
    pub plan: &'a TestPlan,
    pub config: &'a ExperimentConfig,
    pub key: &'a CertificateKey,
    pub population: &'a PopulationSpec,
    pub latent: &'a LatentQuality,
    pub seed: u64,
    pub run_bias: f64,
}

/// Population seed is `seed`; the run seed is derived from it so that
/// several runs over one population differ only in `seed`'s run part.
pub fn simulate(input: &SimulateInput<'_>) -> Result<Vec<Submission>> {
    let workers = synthesize_population(input.population, input.seed)?;
    let run = RunSpec {
        seed: input.seed ^ 0x005e_ed0f_2a11,
        run_bias: input.run_bias,
        start: Timestamp(1_700_000_000),
    };
    Ok(simulate_run(
        input.plan,
        input.config,
        &workers,
        input.latent,
        &run,
        input.key,
    )?)
}

pub fn answers_table(subs: &[Submission]) -> Table {
    submissions_to_table(subs)
}

pub struct CleanOutput {
    pub submissions: Vec<Submission>,
    pub parse_report: ParseReport,
    pub screening: Screening,
    pub actions: Vec<PlatformAction>,
    pub conditions: BTreeMap<String, String>,
}

pub fn clean(
    answers: &Table,
    config: &ExperimentConfig,
    key: &CertificateKey,
    plan: Option<&TestPlan>,
) -> Result<CleanOutput> {
    let parsed = parse_answer_batch(answers, &config.scale())?;
    let histories = reconstruct_sessions(&parsed.submissions);
    let screening = screen_batch(&parsed.submissions, &histories, config, key);
    let actions = plan_actions(&screening.verdicts, config);
    let conditions = condition_map(
        plan,
        config,
        screening.usable_ratings.iter().map(|r| r.stimulus_id.as_str()),
    )?;
    Ok(CleanOutput {
        submissions: parsed.submissions,
        parse_report: parsed.report,
        screening,
        actions,
        conditions,
    })
}

#[derive(Serialize)]
struct CleanReport<'a> {
    parse: &'a ParseReport,
    cleansing: &'a p808_core::cleansing::CleansingReport,
    utility: &'a p808_core::cleansing::UtilityReport,
}

fn action_table(actions: &[PlatformAction], kind: ActionKind) -> Table {
    let header = match kind {
        ActionKind::Approve => vec!["assignment_id", "worker_id", "idempotency_key"],
        ActionKind::Reject => vec!["assignment_id", "worker_id", "reason", "idempotency_key"],
        ActionKind::Bonus => vec![
            "assignment_id",
            "worker_id",
            "amount_minor_units",
            "currency",
            "message",
            "idempotency_key",
        ],
        ActionKind::Notify => vec!["worker_id", "message", "idempotency_key"],
    };
    let mut t = Table::new(header.into_iter().map(String::from).collect());
    for a in actions.iter().filter(|a| a.kind == kind) {
        let assignment = a.assignment_id.clone().unwrap_or_default();
        let message = a.message.clone();
        let key = a.idempotency_key.clone();
        t.rows.push(match kind {
            ActionKind::Approve => vec![assignment, a.worker_id.clone(), key],
            ActionKind::Reject => vec![assignment, a.worker_id.clone(), message, key],
            ActionKind::Bonus => vec![
                assignment,
                a.worker_id.clone(),
                a.amount_minor_units.unwrap_or_default().to_string(),
                a.currency.clone().unwrap_or_default(),
                message,
                key,
            ],
            ActionKind::Notify => vec![a.worker_id.clone(), message, key],
        });
    }
    t
}

/// `verdicts.csv`, `usable_ratings.csv`, `report.json` and one CSV per
/// platform action kind.
pub fn write_clean(dir: &Path, out: &CleanOutput) -> Result<()> {
    write_csv(&dir.join("verdicts.csv"), &verdicts_table(&out.screening.verdicts))?;
    write_csv(
        &dir.join("usable_ratings.csv"),
        &ratings_table(&out.screening.usable_ratings, &out.conditions),
    )?;
    write_json(
        &dir.join("report.json"),
        &CleanReport {
            parse: &out.parse_report,
            cleansing: &out.screening.report,
            utility: &out.screening.utility,
        },
    )?;
    for (kind, file) in [
        (ActionKind::Approve, "approve.csv"),
        (ActionKind::Reject, "reject.csv"),
        (ActionKind::Bonus, "bonus.csv"),
        (ActionKind::Notify, "notify.csv"),
    ] {
        write_csv(&dir.join(file), &action_table(&out.actions, kind))?;
    }
    Ok(())
}

/// One ratings file and its stimulus-to-condition map.
pub struct RatingsRun {
    pub ratings: Vec<Rating>,
    pub conditions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub per_stimulus: Aggregation,
    pub per_condition: Aggregation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmos: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingAnalysis {
    pub conditions: Vec<String>,
    pub pcc: f64,
    pub srcc: f64,
    pub rmse: f64,
    pub mapping: MappingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsOutput {
    pub method: Method,
    pub runs: Vec<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// First run against external scores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<MappingAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<RunComparison>,
}

pub struct StatsInput<'a> {
    pub runs: &'a [RatingsRun],
    /// Inferred from presentation orders when absent.
    pub method: Option<Method>,
    pub reference: Option<&'a str>,
    pub map_against: Option<(&'a BTreeMap<String, f64>, usize)>,
    pub min_votes: usize,
}

fn infer_method(runs: &[RatingsRun]) -> Method {
    let ordered = runs
        .iter()
        .flat_map(|r| &r.ratings)
        .any(|r| r.presentation_order.is_some());
    if ordered {
        Method::Ccr
    } else {
        Method::Acr
    }
}

pub fn stats(input: &StatsInput<'_>) -> Result<StatsOutput> {
    if input.runs.is_empty() {
        bail!("no ratings given");
    }
    let method = input.method.unwrap_or_else(|| infer_method(input.runs));
    let mut runs = Vec::with_capacity(input.runs.len());
    for (i, run) in input.runs.iter().enumerate() {
        let by_cond = GroupBy::Condition(&run.conditions);
        let (per_stimulus, per_condition) = if method == Method::Ccr {
            (
                cmos(&run.ratings, GroupBy::Stimulus, 1)?,
                cmos(&run.ratings, by_cond, input.min_votes)?,
            )
        } else {
            (
                aggregate(&run.ratings, GroupBy::Stimulus, 1),
                aggregate(&run.ratings, by_cond, input.min_votes),
            )
        };
        let dmos = input
            .reference
            .map(|r| dmos_map(&per_condition.mos_map(), r))
            .transpose()
            .with_context(|| format!("run {}", i + 1))?;
        runs.push(RunStats {
            per_stimulus,
            per_condition,
            dmos,
        });
    }
    let mapping = match input.map_against {
        Some((target, order)) => {
            let crowd = runs[0].per_condition.mos_map();
            let conditions: Vec<String> = crowd.keys().filter(|k| target.contains_key(*k)).cloned().collect();
            let x: Vec<f64> = conditions.iter().map(|c| crowd[c]).collect();
            let y: Vec<f64> = conditions.iter().map(|c| target[c]).collect();
            Some(MappingAnalysis {
                pcc: pcc(&x, &y)?,
                srcc: srcc(&x, &y)?,
                rmse: rmse(&x, &y)?,
                mapping: fit_mapping(&x, &y, order)?,
                conditions,
            })
        }
        None => None,
    };
    let comparison = if runs.len() >= 2 {
        let scores: Vec<BTreeMap<String, f64>> = runs.iter().map(|r| r.per_condition.mos_map()).collect();
        Some(compare_runs(&scores, input.reference)?)
    } else {
        None
    };
    Ok(StatsOutput {
        method,
        runs,
        reference: input.reference.map(String::from),
        mapping,
        comparison,
    })
}

fn aggregates_table(runs: &[RunStats], per_condition: bool) -> Table {
    let mut header = vec!["run", "key", "mos", "sd", "n", "ci95"];
    if per_condition {
        header.push("dmos");
    }
    let mut t = Table::new(header.into_iter().map(String::from).collect());
    for (i, run) in runs.iter().enumerate() {
        let agg = if per_condition {
            &run.per_condition
        } else {
            &run.per_stimulus
        };
        for a in &agg.aggregates {
            let mut row = vec![
                (i + 1).to_string(),
                a.key.clone(),
                num(a.mos),
                opt_num(a.sd),
                a.n.to_string(),
                opt_num(a.ci95),
            ];
            if per_condition {
                row.push(opt_num(run.dmos.as_ref().and_then(|d| d.get(&a.key).copied())));
            }
            t.rows.push(row);
        }
    }
    t
}

/// `per_stimulus.csv`, `per_condition.csv` and `analysis.json`.
pub fn write_stats(dir: &Path, out: &StatsOutput) -> Result<()> {
    write_csv(&dir.join("per_stimulus.csv"), &aggregates_table(&out.runs, false))?;
    write_csv(&dir.join("per_condition.csv"), &aggregates_table(&out.runs, true))?;
    #[derive(Serialize)]
    struct Analysis<'a> {
        method: Method,
        #[serde(skip_serializing_if = "Option::is_none")]
        reference: Option<&'a str>,
        omitted: Vec<&'a [String]>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mapping: Option<&'a MappingAnalysis>,
        #[serde(skip_serializing_if = "Option::is_none")]
        comparison: Option<&'a RunComparison>,
    }
    write_json(
        &dir.join("analysis.json"),
        &Analysis {
            method: out.method,
            reference: out.reference.as_deref(),
            omitted: out.runs.iter().map(|r| r.per_condition.omitted.as_slice()).collect(),
            mapping: out.mapping.as_ref(),
            comparison: out.comparison.as_ref(),
        },
    )
}

/// Screens every run and compares passed and failed groups per grouping.
pub fn analyze(
    runs: &[Table],
    config: &ExperimentConfig,
    key: &CertificateKey,
    plan: Option<&TestPlan>,
    groupings: &[Grouping],
) -> Result<FilterAnalysis> {
    let cleaned: Vec<CleanOutput> = runs
        .iter()
        .enumerate()
        .map(|(i, t)| clean(t, config, key, plan).with_context(|| format!("run {}", i + 1)))
        .collect::<Result<_>>()?;
    let mut conditions = BTreeMap::new();
    for c in &cleaned {
        let ids = c
            .submissions
            .iter()
            .flat_map(|s| s.ratings.iter().map(|r| r.clip.as_str()));
        conditions.extend(condition_map(plan, config, ids)?);
    }
    let screened: Vec<ScreenedRun<'_>> = cleaned
        .iter()
        .map(|c| ScreenedRun {
            submissions: &c.submissions,
            verdicts: &c.screening.verdicts,
        })
        .collect();
    Ok(analyze_filters(
        &screened,
        groupings,
        &conditions,
        config.method,
        config.reference_condition.as_deref(),
        &config.analysis,
    )?)
}
