//! Shared test support: brute-force statistics oracles and simulated
//! experiment scenarios.

#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use p808::pipeline::{self, CleanOutput, SimulateInput};
use p808_core::builder::{build_test_plan, TestPlan};
use p808_core::certificate::CertificateKey;
use p808_core::config::{ControlClip, EnvPair, ExperimentConfig, SecretRef};
use p808_core::ingest::Submission;
use p808_core::model::{Method, Role, Stimulus};
use p808_core::simulator::{ArchetypeKind, LatentQuality, PopulationGroup, PopulationSpec};

pub fn config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new("acceptance", Method::Acr, SecretRef::Inline("acceptance-secret".into()));
    c.condition_pattern = Some(r"c(\d+)_".into());
    c.reference_condition = Some("00".into());
    let clip = |url: &str, answer| ControlClip {
        url: url.into(),
        answer,
        tolerance: None,
        reference_url: None,
    };
    c.pools.trapping = vec![
        clip("https://cdn.example/trap_2.wav", 2),
        clip("https://cdn.example/trap_4.wav", 4),
    ];
    c.pools.gold = vec![
        clip("https://cdn.example/gold_1.wav", 1),
        clip("https://cdn.example/gold_5.wav", 5),
    ];
    c.pools.environment = (0..4)
        .map(|i| EnvPair {
            first: format!("https://cdn.example/env{i}_a.wav"),
            second: format!("https://cdn.example/env{i}_b.wav"),
            better: (i % 2) as u8,
        })
        .collect();
    c.pools.earpods_answer = Some("7".into());
    c.payment.bonus_minor_units = 50;
    c
}

pub fn key(config: &ExperimentConfig) -> CertificateKey {
    CertificateKey::derive(b"acceptance-secret", &config.experiment_id)
}

/// Latent qualities evenly spread over `[lo, hi]`, condition `00` lowest.
pub fn latent(conditions: usize, lo: f64, hi: f64) -> LatentQuality {
    (0..conditions)
        .map(|c| (format!("{c:02}"), lo + (hi - lo) * c as f64 / (conditions - 1) as f64))
        .collect()
}

pub fn clips(conditions: usize, per_condition: usize) -> Vec<Stimulus> {
    (0..conditions)
        .flat_map(|c| {
            (0..per_condition).map(move |i| {
                Stimulus::new(format!("https://cdn.example/c{c:02}_f{i:02}.wav"), Role::Rating)
                    .with_condition(format!("{c:02}"))
            })
        })
        .collect()
}

pub struct Scenario {
    pub config: ExperimentConfig,
    pub key: CertificateKey,
    pub plan: TestPlan,
    pub latent: LatentQuality,
}

pub fn scenario(conditions: usize, per_condition: usize, plan_seed: u64) -> Scenario {
    let config = config();
    let key = key(&config);
    let plan = build_test_plan(&clips(conditions, per_condition), &config, plan_seed).unwrap();
    Scenario {
        latent: latent(conditions, 1.5, 4.5),
        config,
        key,
        plan,
    }
}

pub fn population(size: usize, groups: Vec<PopulationGroup>) -> PopulationSpec {
    PopulationSpec { size, groups }
}

pub fn reliable_and_spammers(size: usize, spammer_fraction: f64) -> PopulationSpec {
    population(
        size,
        vec![
            PopulationGroup::new(ArchetypeKind::Reliable, 1.0 - spammer_fraction),
            PopulationGroup::new(ArchetypeKind::Spammer, spammer_fraction),
        ],
    )
}

impl Scenario {
    pub fn simulate(&self, population: &PopulationSpec, seed: u64, run_bias: f64) -> Vec<Submission> {
        pipeline::simulate(&SimulateInput {
            plan: &self.plan,
            config: &self.config,
            key: &self.key,
            population,
            latent: &self.latent,
            seed,
            run_bias,
        })
        .unwrap()
    }

    /// Through the CSV text form, as a real batch would arrive.
    pub fn clean(&self, subs: &[Submission]) -> CleanOutput {
        let bytes = p808::io::csv_bytes(&pipeline::answers_table(subs)).unwrap();
        let table = p808::io::parse_csv(bytes.as_slice()).unwrap();
        pipeline::clean(&table, &self.config, &self.key, Some(&self.plan)).unwrap()
    }

    pub fn latent_of(&self, scores: &BTreeMap<String, f64>) -> (Vec<f64>, Vec<f64>) {
        scores.iter().map(|(c, s)| (*s, self.latent.scores[c])).unzip()
    }
}
