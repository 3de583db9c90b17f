use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::model::{PresentationOrder, Stimulus};

/// A reference/processed pair with the order it is played in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub reference: Stimulus,
    pub processed: Stimulus,
    pub order: PresentationOrder,
}

impl Pair {
    /// Trap pair: the reference against itself. The only correct CCR answer is 0.
    pub fn is_null(&self) -> bool {
        self.reference.url == self.processed.url
    }

    pub fn expected_answer(&self) -> Option<i32> {
        self.is_null().then_some(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcrPairs {
    pub pairs: Vec<Pair>,
    /// One trap pair per session, cycling through the references.
    pub null_traps: Vec<Pair>,
}

pub(crate) fn reference_index(references: &[Stimulus]) -> BTreeMap<&str, &Stimulus> {
    references.iter().map(|r| (r.id.as_str(), r)).collect()
}

/// Pairs every processed clip with its reference (via `Stimulus::reference`)
/// and draws an independent fair presentation order for each pair.
pub fn build_ccr_pairs(
    references: &[Stimulus],
    processed: &[Stimulus],
    sessions: usize,
    seed: u64,
) -> Result<CcrPairs, PlanError> {
    let index = reference_index(references);
    let mut used = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(processed.len());
    for p in processed {
        let reference = p
            .reference
            .as_deref()
            .and_then(|id| index.get(id))
            .ok_or_else(|| PlanError::UnmatchedPair(p.id.clone()))?;
        used.insert(reference.id.as_str());
        let order = if rng.random_bool(0.5) {
            PresentationOrder::ProcessedFirst
        } else {
            PresentationOrder::ReferenceFirst
        };
        pairs.push(Pair {
            reference: (*reference).clone(),
            processed: p.clone(),
            order,
        });
    }
    if let Some(unused) = references.iter().find(|r| !used.contains(r.id.as_str())) {
        return Err(PlanError::UnpairedReference(unused.id.clone()));
    }
    let null_traps = if references.is_empty() {
        Vec::new()
    } else {
        (0..sessions)
            .map(|s| {
                let r = &references[s % references.len()];
                Pair {
                    reference: r.clone(),
                    processed: r.clone(),
                    order: PresentationOrder::ReferenceFirst,
                }
            })
            .collect()
    };
    Ok(CcrPairs { pairs, null_traps })
}
