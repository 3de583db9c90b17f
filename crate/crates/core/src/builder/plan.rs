use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ccr::{build_ccr_pairs, reference_index};
use crate::config::ExperimentConfig;
use crate::error::PlanError;
use crate::model::{Method, PresentationOrder, RatingScale, Role, Stimulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Rating,
    Trapping,
    Gold,
}

/// One item as shown to the worker. For paired methods `reference` holds the
/// reference clip URL and `order` says which clip plays first. Expected
/// answers are stated in the frame the worker sees (already sign-flipped
/// for CCR questions played processed-first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub kind: QuestionKind,
    pub stimulus: Stimulus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PresentationOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_answer: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_id: String,
    pub rating: Vec<Question>,
    pub trapping: Question,
    pub gold: Question,
    /// Positions of the control questions in the presented sequence
    /// (0-based, over `rating.len() + 2` slots).
    pub trapping_slot: usize,
    pub gold_slot: usize,
    pub training_ref: String,
    pub randomization_seed: u64,
}

impl SessionSpec {
    pub fn rating_stimuli(&self) -> impl Iterator<Item = &Stimulus> {
        self.rating.iter().map(|q| &q.stimulus)
    }

    /// Questions in the order the worker sees them.
    pub fn presentation(&self) -> Vec<&Question> {
        let total = self.rating.len() + 2;
        let mut rating = self.rating.iter();
        (0..total)
            .filter_map(|slot| {
                if slot == self.trapping_slot {
                    Some(&self.trapping)
                } else if slot == self.gold_slot {
                    Some(&self.gold)
                } else {
                    rating.next()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub experiment_id: String,
    pub scale: RatingScale,
    pub votes_target: u32,
    pub sessions_per_clip: usize,
    pub seed: u64,
    pub sessions: Vec<SessionSpec>,
    pub manifest_checksum: String,
}

impl TestPlan {
    pub fn method(&self) -> Method {
        self.scale.method
    }

    pub fn block_size(&self) -> usize {
        self.sessions.first().map_or(0, |s| s.rating.len())
    }

    /// Number of sessions each rating stimulus appears in.
    pub fn coverage(&self) -> BTreeMap<&str, usize> {
        let mut cov = BTreeMap::new();
        for s in &self.sessions {
            for st in s.rating_stimuli() {
                *cov.entry(st.id.as_str()).or_insert(0) += 1;
            }
        }
        cov
    }

    /// Stimulus id to condition label, for rating stimuli that have one.
    pub fn condition_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        for s in &self.sessions {
            for st in s.rating_stimuli() {
                if let Some(c) = &st.condition {
                    map.insert(st.id.clone(), c.clone());
                }
            }
        }
        map
    }

    pub fn compute_checksum(&self) -> String {
        manifest_checksum(&self.experiment_id, self.seed, &self.sessions)
    }
}

fn manifest_checksum(experiment_id: &str, seed: u64, sessions: &[SessionSpec]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "{experiment_id}|{seed}");
    for s in sessions {
        let _ = writeln!(
            text,
            "S|{}|{}|{}|{}|{}",
            s.session_id, s.training_ref, s.trapping_slot, s.gold_slot, s.randomization_seed
        );
        for q in s.rating.iter().chain([&s.trapping, &s.gold]) {
            let _ = writeln!(
                text,
                "Q|{:?}|{}|{}|{:?}|{:?}|{:?}|{:?}",
                q.kind, q.stimulus.id, q.stimulus.url, q.reference, q.order, q.expected_answer, q.tolerance
            );
        }
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn flip(order: PresentationOrder, answer: i32) -> i32 {
    match order {
        PresentationOrder::ReferenceFirst => answer,
        PresentationOrder::ProcessedFirst => -answer,
    }
}

fn draw_order(method: Method, rng: &mut ChaCha8Rng) -> Option<PresentationOrder> {
    match method {
        Method::Acr => None,
        Method::Dcr => Some(PresentationOrder::ReferenceFirst),
        Method::Ccr => Some(if rng.random_bool(0.5) {
            PresentationOrder::ProcessedFirst
        } else {
            PresentationOrder::ReferenceFirst
        }),
    }
}

fn control_question(
    kind: QuestionKind,
    stimulus: &Stimulus,
    method: Method,
    rng: &mut ChaCha8Rng,
    refs: &BTreeMap<&str, &Stimulus>,
) -> Question {
    let order = draw_order(method, rng);
    let reference = method.is_paired().then(|| {
        stimulus
            .reference
            .as_deref()
            .map(|r| refs.get(r).map_or(r, |s| s.url.as_str()))
            .unwrap_or(stimulus.url.as_str())
            .into()
    });
    let expected = stimulus.expected_answer.map(|a| match order {
        Some(o) if method == Method::Ccr => flip(o, a),
        _ => a,
    });
    Question {
        kind,
        stimulus: stimulus.clone(),
        reference,
        order,
        expected_answer: expected,
        tolerance: stimulus.tolerance,
    }
}

/// Distributes rating clips over sessions and injects the control questions.
///
/// Each session takes the `block` least-covered clips (ties broken by a
/// seeded shuffle) and is then shuffled; trapping and gold questions go to
/// uniformly drawn slots and rotate round-robin through their pools.
pub fn build_test_plan(clips: &[Stimulus], config: &ExperimentConfig, seed: u64) -> Result<TestPlan, PlanError> {
    config.validate()?;
    let scale = config.scale();
    let method = config.method;
    let block = config.sections.rating_block;

    let mut seen = BTreeSet::new();
    for c in clips {
        c.validate(&scale)?;
        if !seen.insert(c.id.as_str()) {
            return Err(PlanError::DuplicateStimulus(c.id.clone()));
        }
    }
    let rating: Vec<&Stimulus> = clips.iter().filter(|c| c.role == Role::Rating).collect();
    let references: Vec<Stimulus> = clips.iter().filter(|c| c.role == Role::Reference).cloned().collect();
    if rating.len() < block {
        return Err(PlanError::InsufficientClips {
            found: rating.len(),
            block,
        });
    }

    let trapping_pool = config.trapping_stimuli();
    let gold_pool = config.gold_stimuli();
    if method != Method::Ccr && trapping_pool.is_empty() {
        return Err(PlanError::EmptyPool("trapping"));
    }
    if gold_pool.is_empty() {
        return Err(PlanError::EmptyPool("gold"));
    }

    let per_clip = config.sessions_per_clip();
    let session_count = (rating.len() * per_clip).div_ceil(block);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs = reference_index(&references);
    let null_traps = if method.is_paired() {
        let processed: Vec<Stimulus> = rating.iter().map(|s| (*s).clone()).collect();
        if references.is_empty() {
            return Err(PlanError::EmptyPool("reference"));
        }
        build_ccr_pairs(&references, &processed, session_count, rng.next_u64())?.null_traps
    } else {
        Vec::new()
    };

    let mut coverage = alloc::vec![0usize; rating.len()];
    let mut sessions = Vec::with_capacity(session_count);
    for s in 0..session_count {
        let session_seed = rng.next_u64();
        let mut srng = ChaCha8Rng::seed_from_u64(session_seed);

        let mut order: Vec<usize> = (0..rating.len()).collect();
        order.shuffle(&mut srng);
        order.sort_by_key(|&i| coverage[i]);
        let mut picked: Vec<usize> = order[..block].to_vec();
        picked.shuffle(&mut srng);
        for &i in &picked {
            coverage[i] += 1;
        }

        let questions = picked
            .iter()
            .map(|&i| {
                let st = rating[i];
                let order = draw_order(method, &mut srng);
                let reference = if method.is_paired() {
                    let rid = st.reference.as_deref().unwrap_or_default();
                    refs.get(rid).map(|r| r.url.clone())
                } else {
                    None
                };
                Question {
                    kind: QuestionKind::Rating,
                    stimulus: st.clone(),
                    reference,
                    order,
                    expected_answer: None,
                    tolerance: None,
                }
            })
            .collect();

        let trapping = if method == Method::Ccr {
            let pair = &null_traps[s];
            Question {
                kind: QuestionKind::Trapping,
                stimulus: pair.processed.clone(),
                reference: Some(pair.reference.url.clone()),
                order: Some(pair.order),
                expected_answer: Some(0),
                tolerance: None,
            }
        } else {
            control_question(
                QuestionKind::Trapping,
                &trapping_pool[s % trapping_pool.len()],
                method,
                &mut srng,
                &refs,
            )
        };
        let gold = control_question(
            QuestionKind::Gold,
            &gold_pool[s % gold_pool.len()],
            method,
            &mut srng,
            &refs,
        );

        let slots = block + 2;
        let trapping_slot = srng.random_range(0..slots);
        let mut gold_slot = srng.random_range(0..slots - 1);
        if gold_slot >= trapping_slot {
            gold_slot += 1;
        }

        sessions.push(SessionSpec {
            session_id: format!("{}-s{:04}", config.experiment_id, s + 1),
            rating: questions,
            trapping,
            gold,
            trapping_slot,
            gold_slot,
            training_ref: config.pools.training_set_id.clone(),
            randomization_seed: session_seed,
        });
    }

    let manifest_checksum = manifest_checksum(&config.experiment_id, seed, &sessions);
    Ok(TestPlan {
        experiment_id: config.experiment_id.clone(),
        scale,
        votes_target: config.votes_target,
        sessions_per_clip: per_clip,
        seed,
        sessions,
        manifest_checksum,
    })
}
