//! Discriminative landmark selection.
//!
//! Given candidate routes and landmark significances, find a discriminative
//! landmark set whose mean significance is maximal, with size in
//! `[ceil(log2 n), n]`. Three solvers share one problem representation:
//! exhaustive enumeration ([`brute_force_select`]), bottom-up simplest-set
//! enumeration with greedy filling ([`ils_select`]), and depth-first expansion
//! with superset pruning ([`greedy_select`]).
//!
//! Internally a landmark set is a bitmask over the beneficial landmarks, whose
//! bit order is descending significance (ties by id).

mod brute;
mod greedy;
mod ils;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SelectError;
use crate::landmark::{LandmarkId, SignificanceLookup};
use crate::route::{beneficial_landmarks, CandidateSet};

pub use brute::{brute_force_select, BRUTE_FORCE_LIMIT};
pub use greedy::greedy_select;
pub use ils::{enumerate_simplest_sets, ils_select, SimplestSets};

/// Values closer than this are treated as equal when ranking sets.
pub const VALUE_EPSILON: f64 = 1e-12;

/// Bitmask capacity.
pub const MAX_BENEFICIAL: usize = 128;

pub(crate) type Mask = u128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Brute,
    Ils,
    #[default]
    Greedy,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Brute => "brute",
            Algorithm::Ils => "ils",
            Algorithm::Greedy => "greedy",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute" => Ok(Algorithm::Brute),
            "ils" => Ok(Algorithm::Ils),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(format!("unknown algorithm `{other}` (expected brute, ils or greedy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Drop the `ceil(log2 n)` lower bound on the set size.
    pub relax_min_size: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub nodes_expanded: u64,
    pub sets_tested: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: BTreeSet<LandmarkId>,
    pub value: f64,
    pub algorithm: Algorithm,
    pub stats: SelectionStats,
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// A selection instance over at least two candidate routes.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    /// Beneficial landmarks, descending significance then ascending id.
    beneficial: Vec<(LandmarkId, f64)>,
    /// Each route's membership restricted to the beneficial landmarks.
    route_masks: Vec<Mask>,
    min_size: usize,
    max_size: usize,
}

impl SelectionProblem {
    pub fn new(routes: &CandidateSet, lookup: &impl SignificanceLookup, opts: SelectOptions) -> Result<Self, SelectError> {
        let n = routes.len();
        if n < 2 {
            return Err(SelectError::Infeasible);
        }
        let mut beneficial = beneficial_landmarks(routes)
            .into_iter()
            .map(|id| lookup.significance(&id).map(|s| (id.clone(), s)).ok_or(SelectError::UnknownLandmark(id)))
            .collect::<Result<Vec<_>, _>>()?;
        if beneficial.len() > MAX_BENEFICIAL {
            return Err(SelectError::TooManyLandmarks { size: beneficial.len(), limit: MAX_BENEFICIAL });
        }
        beneficial.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let route_masks = routes
            .memberships()
            .map(|m| {
                beneficial
                    .iter()
                    .enumerate()
                    .filter(|(_, (id, _))| m.contains(id))
                    .fold(0 as Mask, |acc, (i, _)| acc | (1 << i))
            })
            .collect();
        let min_size = if opts.relax_min_size { 1 } else { ceil_log2(n).max(1) };
        let max_size = n.min(beneficial.len());
        Ok(Self { beneficial, route_masks, min_size, max_size })
    }

    pub fn route_count(&self) -> usize {
        self.route_masks.len()
    }

    /// Beneficial landmarks in descending significance order.
    pub fn beneficial(&self) -> &[(LandmarkId, f64)] {
        &self.beneficial
    }

    /// Inclusive size range of admissible sets.
    pub fn size_range(&self) -> (usize, usize) {
        (self.min_size, self.max_size)
    }

    pub(crate) fn len(&self) -> usize {
        self.beneficial.len()
    }

    pub(crate) fn is_discriminative(&self, set: Mask) -> bool {
        let mut sigs: Vec<Mask> = self.route_masks.iter().map(|m| m & set).collect();
        sigs.sort_unstable();
        sigs.windows(2).all(|w| w[0] != w[1])
    }

    pub(crate) fn is_simplest(&self, set: Mask) -> bool {
        self.is_discriminative(set) && bits(set).all(|i| !self.is_discriminative(set & !(1 << i)))
    }

    /// Mean significance, always summed in bit order so equal sets give
    /// bit-identical values whichever solver produced them.
    pub(crate) fn value(&self, set: Mask) -> f64 {
        let (sum, count) = bits(set).fold((0.0, 0usize), |(s, c), i| (s + self.beneficial[i].1, c + 1));
        sum / count as f64
    }

    pub(crate) fn ids(&self, set: Mask) -> BTreeSet<LandmarkId> {
        bits(set).map(|i| self.beneficial[i].0.clone()).collect()
    }

    /// The best superset of `set` for every admissible size: extend with the
    /// most significant beneficial landmarks not already in it.
    pub(crate) fn best_fill(&self, set: Mask, best: &mut Option<Scored>) {
        let size = set.count_ones() as usize;
        let mut filled = set;
        let mut k = size;
        let mut next = 0;
        loop {
            if k >= self.min_size && k <= self.max_size && k >= 1 {
                consider(self, best, filled);
            }
            if k >= self.max_size {
                break;
            }
            while next < self.len() && filled & (1 << next) != 0 {
                next += 1;
            }
            if next >= self.len() {
                break;
            }
            filled |= 1 << next;
            k += 1;
        }
    }

    pub(crate) fn finish(&self, best: Option<Scored>, algorithm: Algorithm, stats: SelectionStats) -> Result<SelectionResult, SelectError> {
        let best = best.ok_or(SelectError::Infeasible)?;
        Ok(SelectionResult { chosen: self.ids(best.set), value: best.value, algorithm, stats })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Scored {
    pub set: Mask,
    pub value: f64,
}

/// Ranking: higher value, then fewer landmarks, then lexicographically smaller ids.
pub(crate) fn compare(p: &SelectionProblem, a: &Scored, b: &Scored) -> Ordering {
    if (a.value - b.value).abs() > VALUE_EPSILON {
        return a.value.total_cmp(&b.value);
    }
    let (ca, cb) = (a.set.count_ones(), b.set.count_ones());
    if ca != cb {
        return cb.cmp(&ca);
    }
    let ia: Vec<LandmarkId> = p.ids(a.set).into_iter().collect();
    let ib: Vec<LandmarkId> = p.ids(b.set).into_iter().collect();
    ib.cmp(&ia)
}

pub(crate) fn consider(p: &SelectionProblem, best: &mut Option<Scored>, set: Mask) {
    let cand = Scored { set, value: p.value(set) };
    match best {
        Some(b) if compare(p, &cand, b) != Ordering::Greater => {}
        _ => *best = Some(cand),
    }
}

pub(crate) fn bits(set: Mask) -> impl Iterator<Item = usize> {
    let mut rest = set;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

pub(crate) fn highest_bit(set: Mask) -> Option<usize> {
    (set != 0).then(|| (Mask::BITS - 1 - set.leading_zeros()) as usize)
}

/// Runs the chosen solver. A single candidate route needs no questions, so
/// it yields an empty selection with value 0.
pub fn select(
    routes: &CandidateSet,
    lookup: &impl SignificanceLookup,
    algorithm: Algorithm,
    opts: SelectOptions,
) -> Result<SelectionResult, SelectError> {
    if routes.len() < 2 {
        return Ok(SelectionResult { chosen: BTreeSet::new(), value: 0.0, algorithm, stats: SelectionStats::default() });
    }
    let p = SelectionProblem::new(routes, lookup, opts)?;
    match algorithm {
        Algorithm::Brute => brute_force_select(&p),
        Algorithm::Ils => ils_select(&p),
        Algorithm::Greedy => greedy_select(&p),
    }
}
