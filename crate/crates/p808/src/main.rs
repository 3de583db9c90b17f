use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use p808::io::{self, certificate_key, read_config, read_csv, read_json, read_wav, write_csv, write_json, write_wav};
use p808::ledger::{FileTransport, JsonlLedger};
use p808::pipeline::{self, RatingsRun, SimulateInput, StatsInput};
use p808_core::builder::{create_trapping_clip, TestPlan};
use p808_core::cleansing::Grouping;
use p808_core::model::Method;
use p808_core::platform::{execute, plan_actions};
use p808_core::simulator::{LatentQuality, PopulationSpec};
use p808_core::stats::{subsample_votes, GroupBy};

#[derive(Parser)]
#[command(
    name = "p808",
    version,
    about = "Crowdsourced speech-quality tests: build, simulate, clean, analyze"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the session plan, platform input rows and the HIT app.
    Build {
        #[arg(long)]
        clips: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Embed this build time (seconds since epoch) in the app.
        #[arg(long)]
        build_timestamp: Option<u64>,
    },
    /// Make a trapping clip: source prefix followed by the instruction.
    Trap {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        message: PathBuf,
        #[arg(long)]
        answer: i32,
        /// Defaults to the config value when --config is given, else 3 s.
        #[arg(long)]
        prefix: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one answer batch for a built plan.
    Simulate {
        /// Output directory of `build`.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        population: PathBuf,
        /// CSV with `condition,score` columns.
        #[arg(long)]
        latent: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        run_bias: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Screen an answer batch and write verdicts, usable ratings and reports.
    Clean {
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory of `build`, for condition labels.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate ratings; several --ratings files are compared as runs.
    Stats {
        #[arg(long, required = true)]
        ratings: Vec<PathBuf>,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        method: Option<Method>,
        /// CSV with `condition,score` columns to correlate and map against.
        #[arg(long)]
        map_against: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = parse_order)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        min_votes: usize,
        /// Keep at most this many randomly drawn votes per condition.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        subsample_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Effect of each screening criterion on cross-run reliability.
    Analyze {
        #[arg(long, required = true)]
        answers: Vec<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Comma separated criteria, `all` for all filters together.
        #[arg(long, value_delimiter = ',', default_value = "gold,environment,headset,all")]
        criteria: Vec<Grouping>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Approve, reject, pay bonuses and notify, from a verdicts file.
    Bonus {
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dry_run: bool,
        #[arg(long, default_value = "p808-ledger.jsonl")]
        ledger: PathBuf,
        /// Where the mock transport records performed actions.
        #[arg(long, default_value = "p808-transport.jsonl")]
        transport: PathBuf,
        /// Execution report; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_order(s: &str) -> Result<usize, String> {
    match s {
        "1" => Ok(1),
        "3" => Ok(3),
        _ => Err(format!("order must be 1 or 3, got {s}")),
    }
}

fn load_plan(dir: &Path) -> Result<TestPlan> {
    read_json(&dir.join("plan.json"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build {
            clips,
            config,
            seed,
            out,
            build_timestamp,
        } => {
            let config = read_config(&config)?;
            let clips = io::parse_clip_list(&read_csv(&clips)?, &config)?;
            let key = certificate_key(&config)?;
            let built = pipeline::build(&clips, &config, &key, seed, build_timestamp)?;
            pipeline::write_build(&out, &built)?;
            eprintln!("{} sessions written to {}", built.plan.sessions.len(), out.display());
        }
        Command::Trap {
            source,
            message,
            answer,
            prefix,
            config,
            out,
        } => {
            let prefix = match (prefix, config) {
                (Some(p), _) => p,
                (None, Some(c)) => read_config(&c)?.trapping_prefix_seconds,
                (None, None) => 3.0,
            };
            let clip = create_trapping_clip(&read_wav(&source)?, &read_wav(&message)?, prefix, answer)?;
            write_wav(&out, &clip.pcm)?;
            write_json(
                &out.with_extension("json"),
                &serde_json::json!({
                    "expected_answer": clip.expected_answer,
                    "prefix_frames": clip.prefix_frames,
                    "frames": clip.pcm.frames(),
                    "duration_seconds": clip.pcm.duration_seconds(),
                }),
            )?;
        }
        Command::Simulate {
            plan,
            population,
            latent,
            seed,
            run_bias,
            out,
        } => {
            let config = read_config(&plan.join("config.json"))?;
            let test_plan = load_plan(&plan)?;
            let population: PopulationSpec = read_json(&population)?;
            let latent = LatentQuality {
                scores: io::parse_scores(&read_csv(&latent)?)?,
            };
            let key = certificate_key(&config)?;
            let subs = pipeline::simulate(&SimulateInput {
                plan: &test_plan,
                config: &config,
                key: &key,
                population: &population,
                latent: &latent,
                seed,
                run_bias,
            })?;
            write_csv(&out, &pipeline::answers_table(&subs))?;
            eprintln!("{} submissions written to {}", subs.len(), out.display());
        }
        Command::Clean {
            answers,
            config,
            plan,
            out,
        } => {
            let config = read_config(&config)?;
            let plan = plan.as_deref().map(load_plan).transpose()?;
            let key = certificate_key(&config)?;
            let cleaned = pipeline::clean(&read_csv(&answers)?, &config, &key, plan.as_ref())?;
            pipeline::write_clean(&out, &cleaned)?;
            let r = &cleaned.screening.report;
            eprintln!(
                "{} submissions: {} accepted, {} usable, {} row errors",
                r.submissions,
                r.accepted,
                r.usable,
                cleaned.parse_report.errors.len()
            );
        }
        Command::Stats {
            ratings,
            reference,
            method,
            map_against,
            order,
            min_votes,
            subsample,
            subsample_seed,
            out,
        } => {
            let runs = ratings
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (mut ratings, conditions) =
                        io::parse_ratings(&read_csv(p)?).with_context(|| p.display().to_string())?;
                    if let Some(n) = subsample {
                        let seed = subsample_seed.wrapping_add(i as u64);
                        ratings = subsample_votes(&ratings, GroupBy::Condition(&conditions), n, seed);
                    }
                    Ok(RatingsRun { ratings, conditions })
                })
                .collect::<Result<Vec<_>>>()?;
            let target = map_against
                .map(|p| read_csv(&p).and_then(|t| io::parse_scores(&t)))
                .transpose()?;
            let result = pipeline::stats(&StatsInput {
                runs: &runs,
                method,
                reference: reference.as_deref(),
                map_against: target.as_ref().map(|t| (t, order)),
                min_votes,
            })?;
            pipeline::write_stats(&out, &result)?;
        }
        Command::Analyze {
            answers,
            config,
            plan,
            criteria,
            out,
        } => {
            if answers.len() < 2 {
                bail!("at least two answer batches are needed");
            }
            let config = read_config(&config)?;
            let plan = plan.as_deref().map(load_plan).transpose()?;
            let key = certificate_key(&config)?;
            let tables = answers.iter().map(|p| read_csv(p)).collect::<Result<Vec<_>>>()?;
            let analysis = pipeline::analyze(&tables, &config, &key, plan.as_ref(), &criteria)?;
            write_json(&out.join("filters.json"), &analysis)?;
            for s in &analysis.skipped {
                eprintln!("skipped {}: {}", s.grouping.name(), s.reason);
            }
        }
        Command::Bonus {
            verdicts,
            config,
            dry_run,
            ledger,
            transport,
            report,
        } => {
            let config = read_config(&config)?;
            let verdicts = io::parse_verdicts(&read_csv(&verdicts)?)?;
            let actions = plan_actions(&verdicts, &config);
            let mut ledger = JsonlLedger::open(ledger)?;
            let mut transport = FileTransport::new(transport);
            let result = execute(&actions, &mut transport, &mut ledger, dry_run).map_err(anyhow::Error::msg)?;
            match report {
                Some(p) => write_json(&p, &result)?,
                None => println!("{}", serde_json::to_string_pretty(&result)?),
            }
            let counts = result.counts();
            eprintln!("{counts:?}");
            if result.count("failed") > 0 {
                bail!("{} actions failed", result.count("failed"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
