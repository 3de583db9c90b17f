//! Vote subsampling, to compare tests at an equal number of votes per
//! group. The sampling unit is the single vote.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GroupBy;
use crate::model::Rating;

/// Draws `per_group` votes uniformly without replacement from every group;
/// groups with fewer votes keep all of them. Votes outside any group are
/// dropped. Output keeps the input order, so the result only depends on
/// `seed` and the ratings.
pub fn subsample_votes(ratings: &[Rating], group_by: GroupBy<'_>, per_group: usize, seed: u64) -> Vec<Rating> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ratings.iter().enumerate() {
        if let Some(k) = group_by.key(&r.stimulus_id) {
            groups.entry(k).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for members in groups.values() {
        if members.len() <= per_group {
            keep.extend_from_slice(members);
        } else {
            keep.extend(
                index::sample(&mut rng, members.len(), per_group)
                    .into_iter()
                    .map(|j| members[j]),
            );
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| ratings[i].clone()).collect()
}
