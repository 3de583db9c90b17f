//! Synthetic worker populations and answer batches with known ground truth.
//! This is a test oracle for the pipeline, not a model of human raters.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::builder::{Question, TestPlan};
use crate::certificate::{Certificate, CertificateKey};
use crate::config::ExperimentConfig;
use crate::error::SimError;
use crate::ingest::{ControlAnswer, EarpodsCheck, EnvTest, QualificationRecord, RatedItem, Submission};
use crate::model::{CertificateKind, Method, PresentationOrder, RatingScale, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchetypeKind {
    Reliable,
    Spammer,
    NoisyEnv,
    NoHeadset,
}

/// Behaviour of one kind of worker. Probabilities apply per session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerArchetype {
    pub kind: ArchetypeKind,
    pub bias: f64,
    pub noise_sd: f64,
    /// Chance of following the trapping instruction; otherwise a uniform guess.
    pub trapping_accuracy: f64,
    /// Chance of judging each environment pair correctly.
    pub env_accuracy: f64,
    pub playback_probability: f64,
    pub earpods_accuracy: f64,
    /// Chance that the browser reports a headset device.
    pub headset_probability: f64,
}

impl WorkerArchetype {
    pub fn preset(kind: ArchetypeKind) -> WorkerArchetype {
        let reliable = WorkerArchetype {
            kind,
            bias: 0.0,
            noise_sd: 0.6,
            trapping_accuracy: 0.98,
            env_accuracy: 0.97,
            playback_probability: 0.98,
            earpods_accuracy: 0.99,
            headset_probability: 0.4,
        };
        match kind {
            ArchetypeKind::Reliable => reliable,
            ArchetypeKind::Spammer => WorkerArchetype {
                noise_sd: 0.0,
                trapping_accuracy: 0.0,
                env_accuracy: 0.5,
                playback_probability: 0.95,
                earpods_accuracy: 0.9,
                ..reliable
            },
            ArchetypeKind::NoisyEnv => WorkerArchetype {
                noise_sd: 1.3,
                trapping_accuracy: 0.95,
                env_accuracy: 0.6,
                ..reliable
            },
            ArchetypeKind::NoHeadset => WorkerArchetype {
                headset_probability: 0.0,
                ..reliable
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("trapping_accuracy", self.trapping_accuracy),
            ("env_accuracy", self.env_accuracy),
            ("playback_probability", self.playback_probability),
            ("earpods_accuracy", self.earpods_accuracy),
            ("headset_probability", self.headset_probability),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Archetype(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) || !self.bias.is_finite() {
            return Err(SimError::Archetype(format!(
                "noise_sd = {}, bias = {}",
                self.noise_sd, self.bias
            )));
        }
        Ok(())
    }
}

/// A share of the population, with optional overrides of the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationGroup {
    pub kind: ArchetypeKind,
    pub fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trapping_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playback_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earpods_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headset_probability: Option<f64>,
}

impl PopulationGroup {
    pub fn new(kind: ArchetypeKind, fraction: f64) -> PopulationGroup {
        PopulationGroup {
            kind,
            fraction,
            bias: None,
            noise_sd: None,
            trapping_accuracy: None,
            env_accuracy: None,
            playback_probability: None,
            earpods_accuracy: None,
            headset_probability: None,
        }
    }

    pub fn archetype(&self) -> WorkerArchetype {
        let p = WorkerArchetype::preset(self.kind);
        WorkerArchetype {
            kind: self.kind,
            bias: self.bias.unwrap_or(p.bias),
            noise_sd: self.noise_sd.unwrap_or(p.noise_sd),
            trapping_accuracy: self.trapping_accuracy.unwrap_or(p.trapping_accuracy),
            env_accuracy: self.env_accuracy.unwrap_or(p.env_accuracy),
            playback_probability: self.playback_probability.unwrap_or(p.playback_probability),
            earpods_accuracy: self.earpods_accuracy.unwrap_or(p.earpods_accuracy),
            headset_probability: self.headset_probability.unwrap_or(p.headset_probability),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub size: usize,
    pub groups: Vec<PopulationGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub worker_id: String,
    pub archetype: WorkerArchetype,
    pub fingerprint: String,
}

/// Largest-remainder apportionment of `size` over `fractions`.
fn apportion(size: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * size as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let mut rest = size - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in by_remainder {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

pub fn synthesize_population(spec: &PopulationSpec, seed: u64) -> Result<Vec<Worker>, SimError> {
    if spec.size == 0 || spec.groups.is_empty() {
        return Err(SimError::EmptyPopulation);
    }
    let total: f64 = spec.groups.iter().map(|g| g.fraction).sum();
    if spec.groups.iter().any(|g| g.fraction.is_nan() || g.fraction < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(SimError::Fractions(format!("{total}")));
    }
    let archetypes: Vec<WorkerArchetype> = spec.groups.iter().map(PopulationGroup::archetype).collect();
    for a in &archetypes {
        a.validate()?;
    }
    let counts = apportion(spec.size, &spec.groups.iter().map(|g| g.fraction).collect::<Vec<_>>());
    let mut kinds: Vec<WorkerArchetype> = archetypes
        .iter()
        .zip(counts)
        .flat_map(|(a, n)| core::iter::repeat_n(*a, n))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kinds.shuffle(&mut rng);
    Ok(kinds
        .into_iter()
        .enumerate()
        .map(|(i, archetype)| {
            let mut fp = [0u8; 16];
            rng.fill_bytes(&mut fp);
            Worker {
                worker_id: format!("W{:04}", i + 1),
                archetype,
                fingerprint: hex::encode(fp),
            }
        })
        .collect())
}

/// True score per condition, on the experiment's scale (for CCR: the score
/// of the processed clip relative to its reference).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentQuality {
    pub scores: BTreeMap<String, f64>,
}

impl LatentQuality {
    pub fn validate(&self, scale: &RatingScale) -> Result<(), SimError> {
        for (c, s) in &self.scores {
            if !(*s >= scale.min as f64 && *s <= scale.max as f64) {
                return Err(SimError::LatentOutOfScale {
                    condition: c.clone(),
                    score: format!("{s}"),
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, f64)> for LatentQuality {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        LatentQuality {
            scores: iter.into_iter().collect(),
        }
    }
}

/// Parameters of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub seed: u64,
    /// Offset added to every honest rating of the run.
    pub run_bias: f64,
    pub start: Timestamp,
}

impl RunSpec {
    pub fn new(seed: u64) -> RunSpec {
        RunSpec {
            seed,
            run_bias: 0.0,
            start: Timestamp(1_700_000_000),
        }
    }
}

struct WorkerState {
    clock: u64,
    sessions: usize,
    rated: BTreeSet<String>,
    qualification: Option<String>,
    environment: Option<Certificate>,
}

struct Ctx<'a> {
    scale: RatingScale,
    config: &'a ExperimentConfig,
    key: &'a CertificateKey,
    latent: &'a LatentQuality,
    conditions: BTreeMap<String, String>,
    run_bias: f64,
}

fn uniform(rng: &mut ChaCha8Rng, scale: &RatingScale) -> i32 {
    rng.random_range(scale.min..=scale.max)
}

/// Honest answer around a canonical score, shown in the displayed frame.
fn honest(
    rng: &mut ChaCha8Rng,
    ctx: &Ctx<'_>,
    a: &WorkerArchetype,
    canonical: f64,
    order: Option<PresentationOrder>,
) -> i32 {
    let noise = if a.noise_sd > 0.0 {
        Normal::new(0.0, a.noise_sd).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    };
    let score = canonical + a.bias + ctx.run_bias + noise;
    let shown = match order {
        Some(PresentationOrder::ProcessedFirst) => -score,
        _ => score,
    };
    ctx.scale.clamp_round(shown)
}

fn rate(rng: &mut ChaCha8Rng, ctx: &Ctx<'_>, a: &WorkerArchetype, q: &Question) -> Result<i32, SimError> {
    if a.kind == ArchetypeKind::Spammer {
        return Ok(uniform(rng, &ctx.scale));
    }
    let condition = ctx
        .conditions
        .get(&q.stimulus.id)
        .ok_or_else(|| SimError::MissingLatent(q.stimulus.id.clone()))?;
    let latent = *ctx
        .latent
        .scores
        .get(condition)
        .ok_or_else(|| SimError::MissingLatent(condition.clone()))?;
    Ok(honest(rng, ctx, a, latent, q.order))
}

fn gold_answer(rng: &mut ChaCha8Rng, ctx: &Ctx<'_>, a: &WorkerArchetype, q: &Question) -> i32 {
    if a.kind == ArchetypeKind::Spammer {
        return uniform(rng, &ctx.scale);
    }
    let shown = q.expected_answer.unwrap_or_default() as f64;
    let canonical = match q.order {
        Some(PresentationOrder::ProcessedFirst) => -shown,
        _ => shown,
    };
    honest(rng, ctx, a, canonical, q.order)
}

fn control(q: &Question, answer: i32, played: bool, ctx: &Ctx<'_>) -> ControlAnswer {
    ControlAnswer {
        clip: q.stimulus.url.clone(),
        answer: Some(answer),
        expected: q.expected_answer.unwrap_or_default(),
        tolerance: q.tolerance,
        played,
        order: if ctx.scale.method == Method::Ccr { q.order } else { None },
    }
}

/// Simulates one run of `plan`: every session is taken by one of the least
/// busy workers who have not rated any of its clips before in this run.
pub fn simulate_run(
    plan: &TestPlan,
    config: &ExperimentConfig,
    workers: &[Worker],
    latent: &LatentQuality,
    run: &RunSpec,
    key: &CertificateKey,
) -> Result<Vec<Submission>, SimError> {
    if workers.is_empty() {
        return Err(SimError::EmptyPopulation);
    }
    if plan.method() != config.method {
        return Err(SimError::MethodMismatch {
            plan: plan.method(),
            config: config.method,
        });
    }
    let ctx = Ctx {
        scale: plan.scale.clone(),
        config,
        key,
        latent,
        conditions: plan.condition_map(),
        run_bias: run.run_bias,
    };
    latent.validate(&ctx.scale)?;
    for c in ctx.conditions.values() {
        if !latent.scores.contains_key(c) {
            return Err(SimError::MissingLatent(c.clone()));
        }
    }
    for w in workers {
        w.archetype.validate()?;
    }

    let mut master = ChaCha8Rng::seed_from_u64(run.seed);
    let mut states: Vec<WorkerState> = workers
        .iter()
        .map(|_| WorkerState {
            clock: run.start.seconds() + master.random_range(0..7200),
            sessions: 0,
            rated: BTreeSet::new(),
            qualification: None,
            environment: None,
        })
        .collect();

    let mut out = Vec::with_capacity(plan.sessions.len());
    for session in &plan.sessions {
        let eligible: Vec<usize> = (0..workers.len())
            .filter(|&i| session.rating.iter().all(|q| !states[i].rated.contains(&q.stimulus.id)))
            .collect();
        // least-loaded first, so that a small pool is not exhausted early
        let least = eligible.iter().map(|&i| states[i].sessions).min();
        let eligible: Vec<usize> = eligible
            .into_iter()
            .filter(|&i| Some(states[i].sessions) == least)
            .collect();
        let Some(&wi) = eligible.get(master.random_range(0..eligible.len().max(1))) else {
            return Err(SimError::NoEligibleWorker(session.session_id.clone()));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let worker = &workers[wi];
        let a = worker.archetype;
        let state = &mut states[wi];
        state.sessions += 1;
        let submit = state.clock + rng.random_range(600..1200);
        state.clock = submit + rng.random_range(60..3600);
        let now = Timestamp(submit);

        let items = session.rating.len() + 2;
        let skipped = (!rng.random_bool(a.playback_probability)).then(|| rng.random_range(0..items));
        let played = |slot: usize| skipped != Some(slot);
        let slots = session.presentation();
        let slot_of = |q: &Question| slots.iter().position(|p| core::ptr::eq(*p, q)).unwrap_or(0);

        let mut ratings = Vec::with_capacity(session.rating.len());
        for q in &session.rating {
            ratings.push(RatedItem {
                clip: q.stimulus.url.clone(),
                value: Some(rate(&mut rng, &ctx, &a, q)?),
                played: played(slot_of(q)),
                order: if ctx.scale.method == Method::Ccr { q.order } else { None },
            });
            state.rated.insert(q.stimulus.id.clone());
        }
        let t = &session.trapping;
        let trap = if rng.random_bool(a.trapping_accuracy) {
            t.expected_answer.unwrap_or_default()
        } else {
            uniform(&mut rng, &ctx.scale)
        };
        let trapping = control(t, trap, played(session.trapping_slot), &ctx);
        let g = &session.gold;
        let gold = control(g, gold_answer(&mut rng, &ctx, &a, g), played(session.gold_slot), &ctx);

        let mut certificates = Vec::new();
        let qualification = if config.sections.qualification && state.qualification.is_none() {
            let cert = Certificate::issue(ctx.key, CertificateKind::Qualification, &worker.worker_id, now, 0);
            state.qualification = Some(cert.to_token());
            Some(QualificationRecord {
                hearing_passed: true,
                language_passed: true,
                device_type: String::from("headphones"),
            })
        } else {
            None
        };
        if let Some(q) = &state.qualification {
            certificates.push(q.clone());
        }

        let live = state
            .environment
            .as_ref()
            .filter(|c| c.expires_at().is_some_and(|exp| now < exp));
        let env_test = if !config.sections.environment_test {
            None
        } else if let Some(c) = live {
            certificates.push(c.to_token());
            None
        } else {
            let pool = &ctx.config.pools.environment;
            let n = if pool.is_empty() {
                config.sections.environment_pairs
            } else {
                pool.len()
            };
            let answers: Vec<Option<u8>> = (0..n)
                .map(|i| {
                    let better = pool.get(i).map_or(0, |p| p.better);
                    Some(if rng.random_bool(a.env_accuracy) {
                        better
                    } else {
                        1 - better.min(1)
                    })
                })
                .collect();
            let correct = answers
                .iter()
                .enumerate()
                .filter(|(i, x)| **x == Some(pool.get(*i).map_or(0, |p| p.better)))
                .count();
            let passed = correct >= config.filters.environment_pass_threshold;
            if passed {
                let cert = Certificate::issue(
                    ctx.key,
                    CertificateKind::Environment,
                    &worker.worker_id,
                    now,
                    config.certificates.environment_ttl_seconds,
                );
                certificates.push(cert.to_token());
                state.environment = Some(cert);
            }
            Some(EnvTest { answers, passed })
        };

        let earpods = config.sections.earpods_check.then(|| {
            let passed = rng.random_bool(a.earpods_accuracy);
            let right = config
                .pools
                .earpods_answer
                .clone()
                .unwrap_or_else(|| String::from("ok"));
            EarpodsCheck {
                answer: if passed { right } else { format!("not-{right}") },
                passed,
            }
        });
        let detected_devices = if rng.random_bool(a.headset_probability) {
            vec![String::from("Headset Earphone (USB Headset H390)")]
        } else {
            vec![String::from("Speakers (High Definition Audio Device)")]
        };

        out.push(Submission {
            assignment_id: format!("{}-{}", session.session_id, worker.worker_id),
            worker_id: worker.worker_id.clone(),
            session_id: session.session_id.clone(),
            method: ctx.scale.method,
            submit_time: now,
            ratings,
            trapping,
            gold,
            earpods,
            env_test,
            qualification,
            certificates,
            detected_devices,
            client_fingerprint: worker.fingerprint.to_string(),
        });
    }
    Ok(out)
}
