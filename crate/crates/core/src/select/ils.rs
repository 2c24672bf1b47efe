//! Incremental landmark selecting: enumerate all simplest discriminative sets
//! bottom-up, then fill each one with the most significant remaining
//! landmarks for every admissible size.

use std::collections::{BTreeMap, BTreeSet};

use super::{highest_bit, Algorithm, Mask, SelectionProblem, SelectionResult, SelectionStats};
use crate::error::SelectError;
use crate::landmark::LandmarkId;

/// Simplest discriminative sets grouped by size.
#[derive(Debug, Clone, Default)]
pub struct SimplestSets {
    masks: BTreeMap<usize, Vec<Mask>>,
    ids: BTreeMap<usize, Vec<BTreeSet<LandmarkId>>>,
    pub stats: SelectionStats,
}

impl SimplestSets {
    pub fn by_size(&self) -> &BTreeMap<usize, Vec<BTreeSet<LandmarkId>>> {
        &self.ids
    }

    pub fn all(&self) -> impl Iterator<Item = &BTreeSet<LandmarkId>> {
        self.ids.values().flatten()
    }
}

/// Level-wise generation. `visit` sees every generated set exactly once.
/// Level `k + 1` extends each non-discriminative set of level `k` with
/// landmarks of lower rank than all its members, so no set is generated
/// twice. Generation stops at size `n`: a simplest set never has more than
/// `n - 1` landmarks.
pub(crate) fn enumerate_levels(p: &SelectionProblem, mut visit: impl FnMut(Mask, bool)) -> SelectionStats {
    let mut stats = SelectionStats::default();
    let max_level = p.route_count().min(p.len());
    let mut level: Vec<Mask> = (0..p.len()).map(|i| 1 << i).collect();
    let mut k = 1;
    while !level.is_empty() {
        let mut open = Vec::new();
        for set in level {
            stats.sets_tested += 1;
            let disc = p.is_discriminative(set);
            visit(set, disc);
            if !disc {
                open.push(set);
            }
        }
        if k >= max_level {
            break;
        }
        let mut next = Vec::new();
        for set in open {
            stats.nodes_expanded += 1;
            let start = highest_bit(set).map_or(0, |h| h + 1);
            next.extend((start..p.len()).map(|j| set | (1 << j)));
        }
        level = next;
        k += 1;
    }
    stats
}

pub fn enumerate_simplest_sets(p: &SelectionProblem) -> SimplestSets {
    let mut masks: BTreeMap<usize, Vec<Mask>> = BTreeMap::new();
    let stats = enumerate_levels(p, |set, disc| {
        // A discriminative set reached this way has undiscriminative prefixes,
        // but may still contain a smaller discriminative subset.
        if disc && p.is_simplest(set) {
            masks.entry(set.count_ones() as usize).or_default().push(set);
        }
    });
    let ids = masks.iter().map(|(k, v)| (*k, v.iter().map(|&m| p.ids(m)).collect())).collect();
    SimplestSets { masks, ids, stats }
}

pub fn ils_select(p: &SelectionProblem) -> Result<SelectionResult, SelectError> {
    let simplest = enumerate_simplest_sets(p);
    let mut best = None;
    for &set in simplest.masks.values().flatten() {
        p.best_fill(set, &mut best);
    }
    p.finish(best, Algorithm::Ils, simplest.stats)
}
