//! Acceptance suite. Each criterion prints one PASS or FAIL line with the
//! measured values; the run fails if any criterion does. Runs without the
//! test harness so the lines are never captured.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{oracle, population, reliable_and_spammers, scenario};
use p808::pipeline::{condition_map, RatingsRun, StatsInput};
use p808_core::cleansing::{decide, Criterion, CriterionFlags, Flag, Grouping};
use p808_core::config::Filters;
use p808_core::model::Method;
use p808_core::simulator::{synthesize_population, ArchetypeKind, PopulationGroup, PopulationSpec};
use p808_core::stats::{
    aggregate, analyze_filters, compare_runs, condition_scores, dmos_map, fit_mapping, icc_2_1, pcc, rmse, srcc,
    GroupBy, RunMatrix, ScreenedRun,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_INSTANCES: usize = 200;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const TABLE_ICC: f64 = 0.907;
const TABLE_ICC_TOL: f64 = 0.02;
const TABLE_BUDGET: Duration = Duration::from_secs(1);
const OFFSET_TOL: f64 = 1e-12;
const MAPPING_SLACK: f64 = 1e-12;
const E2E_MIN_PCC: f64 = 0.99;
const E2E_MIN_SRCC: f64 = 0.95;
const E2E_MIN_SPAMMER_FAIL: f64 = 0.75;
const E2E_BUDGET: Duration = Duration::from_secs(60);
const REPRO_MIN_ICC_DMOS: f64 = 0.9;
const REPRO_MIN_PCC: f64 = 0.99;
const FILTER_RUNS: usize = 5;

type Outcome = Result<String, String>;
type NamedCheck = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn statistics_oracles() -> Outcome {
    let start = Instant::now();
    let checks = oracle::run_suite(ORACLE_INSTANCES, 808)?;
    let took = start.elapsed();
    check(
        took < ORACLE_BUDGET,
        format!("{ORACLE_INSTANCES} instances, {checks} comparisons at 1e-9 in {took:.2?}"),
    )
}

/// DMOS per model and run, as printed in the reproducibility study.
const TABLE_DMOS: [[f64; 5]; 4] = [
    [0.52, 0.42, 0.47, 0.43, 0.43],
    [0.37, 0.32, 0.36, 0.28, 0.33],
    [0.40, 0.31, 0.36, 0.30, 0.31],
    [0.16, 0.11, 0.17, 0.13, 0.14],
];

fn table_icc() -> Outcome {
    let start = Instant::now();
    let m = RunMatrix::new(TABLE_DMOS.iter().map(|r| r.to_vec()).collect()).map_err(|e| e.to_string())?;
    let icc = icc_2_1(&m).icc;
    let took = start.elapsed();
    check(
        (icc - TABLE_ICC).abs() <= TABLE_ICC_TOL && took < TABLE_BUDGET,
        format!("ICC(2,1) = {icc:.4} (target {TABLE_ICC} +/- {TABLE_ICC_TOL}) in {took:.2?}"),
    )
}

fn dmos_offset_invariance() -> Outcome {
    let s = scenario(20, 12, 3);
    let subs = s.simulate(&reliable_and_spammers(60, 0.2), 31, 0.0);
    let cleaned = s.clean(&subs);
    let conditions = &cleaned.conditions;
    let base = aggregate(&cleaned.screening.usable_ratings, GroupBy::Condition(conditions), 1).mos_map();
    let base_dmos = dmos_map(&base, "00").map_err(|e| e.to_string())?;
    let mut worst_mos: f64 = 0.0;
    let mut worst_dmos: f64 = 0.0;
    for c in [1, -1, 2, 3] {
        let mut shifted = cleaned.screening.usable_ratings.clone();
        shifted.iter_mut().for_each(|r| r.value += c);
        let mos = aggregate(&shifted, GroupBy::Condition(conditions), 1).mos_map();
        let dmos = dmos_map(&mos, "00").map_err(|e| e.to_string())?;
        for k in base.keys() {
            worst_mos = worst_mos.max((mos[k] - base[k] - c as f64).abs());
            worst_dmos = worst_dmos.max((dmos[k] - base_dmos[k]).abs());
        }
    }
    // a real-valued offset applied to condition scores
    let shifted: BTreeMap<String, f64> = base.iter().map(|(k, v)| (k.clone(), v + 0.37)).collect();
    let dmos = dmos_map(&shifted, "00").map_err(|e| e.to_string())?;
    for k in base.keys() {
        worst_dmos = worst_dmos.max((dmos[k] - base_dmos[k]).abs());
    }
    check(
        worst_mos <= OFFSET_TOL && worst_dmos <= OFFSET_TOL && base.len() == 20,
        format!(
            "{} conditions, max MOS shift error {worst_mos:.1e}, max DMOS change {worst_dmos:.1e}",
            base.len()
        ),
    )
}

fn mapping_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut cases = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..490 {
        let n = rng.random_range(5..=60);
        let (a, b, c) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(0.2..1.5),
            rng.random_range(-0.3..0.3),
        );
        let noise = rng.random_range(0.0..0.8);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| a + b * v + c * (v - 3.0).powi(2) + noise * rng.random_range(-1.0..1.0))
            .collect();
        let raw = rmse(&x, &y).map_err(|e| e.to_string())?;
        let first = fit_mapping(&x, &y, 1).map_err(|e| e.to_string())?.fit_rmse;
        let third = fit_mapping(&x, &y, 3).map_err(|e| e.to_string())?.fit_rmse;
        worst = worst.max(first - raw).max(third - first);
        cases += 1;
    }
    // condition MOS of simulated runs against the latent quality
    let s = scenario(30, 8, 4);
    for seed in 0..10 {
        let cleaned = s.clean(&s.simulate(&reliable_and_spammers(60, 0.2), 40 + seed, 0.2));
        let mos = condition_scores(&cleaned.screening.usable_ratings, &cleaned.conditions, Method::Acr, 1)
            .map_err(|e| e.to_string())?;
        let (x, y) = s.latent_of(&mos);
        let raw = rmse(&x, &y).map_err(|e| e.to_string())?;
        let first = fit_mapping(&x, &y, 1).map_err(|e| e.to_string())?.fit_rmse;
        let third = fit_mapping(&x, &y, 3).map_err(|e| e.to_string())?.fit_rmse;
        worst = worst.max(first - raw).max(third - first);
        cases += 1;
    }
    check(
        worst <= MAPPING_SLACK,
        format!("{cases} fit sets, largest violation {worst:.2e} (order 3 <= order 1 <= raw)"),
    )
}

fn spammer_ids(spec: &PopulationSpec, seed: u64) -> BTreeSet<String> {
    synthesize_population(spec, seed)
        .unwrap()
        .into_iter()
        .filter(|w| w.archetype.kind == ArchetypeKind::Spammer)
        .map(|w| w.worker_id)
        .collect()
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let s = scenario(50, 12, 5);
    let spec = reliable_and_spammers(125, 0.2);
    let seed = 2024;
    let subs = s.simulate(&spec, seed, 0.0);
    let cleaned = s.clean(&subs);
    if !cleaned.parse_report.errors.is_empty() {
        return Err(format!("{} parse errors", cleaned.parse_report.errors.len()));
    }
    let result = p808::pipeline::stats(&StatsInput {
        runs: &[RatingsRun {
            ratings: cleaned.screening.usable_ratings.clone(),
            conditions: cleaned.conditions.clone(),
        }],
        method: None,
        reference: Some("00"),
        map_against: None,
        min_votes: 1,
    })
    .map_err(|e| e.to_string())?;
    let (mos, truth) = s.latent_of(&result.runs[0].per_condition.mos_map());
    let r = pcc(&mos, &truth).map_err(|e| e.to_string())?;
    let rho = srcc(&mos, &truth).map_err(|e| e.to_string())?;
    let spammers = spammer_ids(&spec, seed);
    let spam: Vec<_> = cleaned
        .screening
        .verdicts
        .iter()
        .filter(|v| spammers.contains(&v.worker_id))
        .collect();
    let fail = spam.iter().filter(|v| !v.ratings_usable).count() as f64 / spam.len() as f64;
    let took = start.elapsed();
    check(
        mos.len() == 50 && r >= E2E_MIN_PCC && rho >= E2E_MIN_SRCC && fail >= E2E_MIN_SPAMMER_FAIL && took < E2E_BUDGET,
        format!(
            "{} submissions, {} conditions: PCC {r:.4} (>= {E2E_MIN_PCC}), SRCC {rho:.4} (>= {E2E_MIN_SRCC}), \
             spammer usability failures {fail:.3} of {} (>= {E2E_MIN_SPAMMER_FAIL}), {took:.2?}",
            subs.len(),
            mos.len(),
            spam.len()
        ),
    )
}

fn reproducibility() -> Outcome {
    let s = scenario(50, 16, 6);
    let spec = reliable_and_spammers(125, 0.2);
    let runs: Vec<BTreeMap<String, f64>> = [(101, 0.3), (202, -0.2)]
        .iter()
        .map(|(seed, bias)| {
            let cleaned = s.clean(&s.simulate(&spec, *seed, *bias));
            condition_scores(&cleaned.screening.usable_ratings, &cleaned.conditions, Method::Acr, 1).unwrap()
        })
        .collect();
    let cmp = compare_runs(&runs, Some("00")).map_err(|e| e.to_string())?;
    let icc_dmos = cmp.icc_dmos.unwrap_or(f64::NAN);
    let offset =
        runs[0].values().sum::<f64>() / runs[0].len() as f64 - runs[1].values().sum::<f64>() / runs[1].len() as f64;
    check(
        icc_dmos >= REPRO_MIN_ICC_DMOS && cmp.mean_pcc >= REPRO_MIN_PCC,
        format!(
            "run biases +0.3/-0.2: mean MOS offset {offset:.3}, ICC(MOS) {:.3}, ICC(DMOS) {icc_dmos:.4} (>= {REPRO_MIN_ICC_DMOS}), \
             PCC {:.4} (>= {REPRO_MIN_PCC}), SRCC {:.4}",
            cmp.icc_mos, cmp.mean_pcc, cmp.mean_srcc
        ),
    )
}

fn filter_impact() -> Outcome {
    let s = scenario(50, 8, 7);
    // spammers that heed the trapping instruction get accepted and are
    // only caught by the usability screen
    let mut attentive = PopulationGroup::new(ArchetypeKind::Spammer, 0.25);
    attentive.trapping_accuracy = Some(1.0);
    let spec = population(
        125,
        vec![
            PopulationGroup::new(ArchetypeKind::Reliable, 0.6),
            PopulationGroup::new(ArchetypeKind::NoisyEnv, 0.15),
            attentive,
        ],
    );
    let cleaned: Vec<_> = (0..FILTER_RUNS as u64)
        .map(|i| s.clean(&s.simulate(&spec, 500 + i, 0.1 * i as f64 - 0.2)))
        .collect();
    let runs: Vec<ScreenedRun<'_>> = cleaned
        .iter()
        .map(|c| ScreenedRun {
            submissions: &c.submissions,
            verdicts: &c.screening.verdicts,
        })
        .collect();
    let conditions = condition_map(Some(&s.plan), &s.config, []).map_err(|e| e.to_string())?;
    let groupings = [
        Grouping::Criterion(Criterion::Gold),
        Grouping::Criterion(Criterion::Environment),
        Grouping::AllFilters,
    ];
    let analysis = analyze_filters(
        &runs,
        &groupings,
        &conditions,
        Method::Acr,
        Some("00"),
        &s.config.analysis,
    )
    .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for a in &analysis.analyzed {
        lines.push(format!(
            "{}: PCC {:.3}/{:.3} z {:.2}{}",
            a.grouping.name(),
            a.passed.comparison.mean_pcc,
            a.failed.comparison.mean_pcc,
            a.pcc_test.z_stat,
            if a.pcc_test.significant { "*" } else { "" }
        ));
    }
    for sk in &analysis.skipped {
        lines.push(format!("{} skipped ({})", sk.grouping.name(), sk.reason));
    }
    let gold = analysis
        .analyzed
        .iter()
        .find(|a| a.grouping == Grouping::Criterion(Criterion::Gold));
    let ok = gold.is_some_and(|g| {
        g.passed.comparison.mean_pcc > g.failed.comparison.mean_pcc && g.pcc_test.significant && g.pcc_test.z_stat > 0.0
    });
    check(ok, format!("{FILTER_RUNS} runs, passed/failed; {}", lines.join("; ")))
}

/// Independent statement of the decision rule: paid when playback, earpods
/// and trapping hold; usable when additionally environment, gold, variance,
/// qualification, integrity and (if enabled) headset hold. A disabled filter
/// always holds.
fn expected_decision(pass: &[bool; 9], enabled: &[bool; 9]) -> (bool, bool) {
    let holds = |i: usize| !enabled[i] || pass[i];
    let accepted = (0..3).all(holds);
    (accepted, accepted && (3..9).all(holds))
}

fn filter_variants() -> Vec<(Filters, [bool; 9])> {
    let mut out = Vec::new();
    for off in 0..=9 {
        for headset in [false, true] {
            let mut f = Filters {
                headset,
                ..Filters::default()
            };
            let mut enabled = [true, true, true, true, true, true, true, true, headset];
            if off < 9 {
                enabled[off] = false;
                let toggle = match Criterion::ALL[off] {
                    Criterion::Playback => &mut f.playback,
                    Criterion::Earpods => &mut f.earpods,
                    Criterion::Trapping => &mut f.trapping,
                    Criterion::Environment => &mut f.environment,
                    Criterion::Gold => &mut f.gold,
                    Criterion::Variance => &mut f.variance,
                    Criterion::Qualification => &mut f.qualification,
                    Criterion::CertificateIntegrity => &mut f.certificate_integrity,
                    Criterion::Headset => &mut f.headset,
                };
                *toggle = false;
            }
            out.push((f, enabled));
        }
    }
    out
}

fn truth_table() -> Outcome {
    let variants = filter_variants();
    let mut cases = 0;
    let mut mismatches = 0;
    for bits in 0u32..1 << 9 {
        let pass: [bool; 9] = std::array::from_fn(|i| bits >> i & 1 == 1);
        let flags: CriterionFlags = Criterion::ALL
            .iter()
            .zip(pass)
            .map(|(c, p)| (*c, Flag::from_bool(p)))
            .collect();
        for (filters, enabled) in &variants {
            cases += 1;
            if decide(&flags, filters) != expected_decision(&pass, enabled) {
                mismatches += 1;
            }
        }
    }
    // verdicts from a simulated batch agree with the rule applied to their flags
    let s = scenario(10, 12, 8);
    let spec = reliable_and_spammers(60, 0.3);
    let cleaned = s.clean(&s.simulate(&spec, 12, 0.0));
    let verdicts = &cleaned.screening.verdicts;
    let inconsistent = verdicts
        .iter()
        .filter(|v| decide(&v.criteria, &s.config.filters) != (v.accepted, v.ratings_usable))
        .count();
    let outcomes: BTreeSet<(bool, bool)> = verdicts.iter().map(|v| (v.accepted, v.ratings_usable)).collect();
    check(
        mismatches == 0 && inconsistent == 0 && outcomes.len() == 3,
        format!(
            "512 flag sets x {} filter settings = {cases} cases, {mismatches} mismatches; \
             {} simulated verdicts, {inconsistent} inconsistent, outcome kinds {}",
            variants.len(),
            verdicts.len(),
            outcomes.len()
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_p808"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "p808 {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn collect_files(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>, root: &Path) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect_files(&p, out, root);
        } else {
            let rel = p.strip_prefix(root).unwrap().display().to_string();
            out.insert(rel, std::fs::read(&p).unwrap());
        }
    }
}

fn pipeline_once(root: &Path, inputs: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |name: &str| root.join(name).display().to_string();
    let i = |name: &str| inputs.join(name).display().to_string();
    run_cli(&[
        "build",
        "--clips",
        &i("clips.csv"),
        "--config",
        &i("config.json"),
        "--seed",
        "9",
        "--out",
        &p("build"),
    ])?;
    run_cli(&[
        "simulate",
        "--plan",
        &p("build"),
        "--population",
        &i("population.json"),
        "--latent",
        &i("latent.csv"),
        "--seed",
        "77",
        "--run-bias",
        "-0.15",
        "--out",
        &p("answers.csv"),
    ])?;
    run_cli(&[
        "clean",
        "--answers",
        &p("answers.csv"),
        "--config",
        &i("config.json"),
        "--plan",
        &p("build"),
        "--out",
        &p("clean"),
    ])?;
    run_cli(&[
        "stats",
        "--ratings",
        &p("clean/usable_ratings.csv"),
        "--reference",
        "00",
        "--map-against",
        &i("latent.csv"),
        "--order",
        "3",
        "--out",
        &p("stats"),
    ])?;
    let mut files = BTreeMap::new();
    collect_files(root, &mut files, root);
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = tmp.path().join("inputs");
    let config = common::config();
    p808::io::write_json(&inputs.join("config.json"), &config).map_err(|e| e.to_string())?;
    let mut clips = String::from("url\n");
    for c in common::clips(10, 12) {
        clips.push_str(&c.url);
        clips.push('\n');
    }
    p808::io::write_file(&inputs.join("clips.csv"), clips.as_bytes()).map_err(|e| e.to_string())?;
    let mut latent = String::from("condition,score\n");
    for (c, v) in &common::latent(10, 1.5, 4.5).scores {
        latent.push_str(&format!("{c},{v}\n"));
    }
    p808::io::write_file(&inputs.join("latent.csv"), latent.as_bytes()).map_err(|e| e.to_string())?;
    p808::io::write_json(&inputs.join("population.json"), &reliable_and_spammers(60, 0.2))
        .map_err(|e| e.to_string())?;

    let a = pipeline_once(&tmp.path().join("a"), &inputs)?;
    let b = pipeline_once(&tmp.path().join("b"), &inputs)?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let bytes: usize = a.values().map(Vec::len).sum();
    check(
        a.len() >= 14 && a.keys().eq(b.keys()) && differing.is_empty(),
        format!(
            "build, simulate, clean, stats twice: {} files, {bytes} bytes, differing {differing:?}",
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [NamedCheck; 9] = [
        ("statistics oracle suite", statistics_oracles),
        ("reproducibility table ICC", table_icc),
        ("DMOS offset invariance", dmos_offset_invariance),
        ("mapping dominance", mapping_dominance),
        ("end-to-end simulation", end_to_end),
        ("two-run reproducibility", reproducibility),
        ("filter impact (gold)", filter_impact),
        ("cleansing truth table", truth_table),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<28} {detail}"),
            Err(detail) => {
                println!("FAIL  {name:<28} {detail}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
