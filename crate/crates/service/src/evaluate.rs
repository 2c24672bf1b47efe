//! Resolving a request from its candidates alone: either the candidates
//! largely agree, or one of them closely matches an earlier verified route.

use std::collections::BTreeSet;

use routecrowd_core::{CandidateSet, LandmarkId, LandmarkRoute};
use serde::{Deserialize, Serialize};

/// Largest candidate count for which agreement clusters are found exactly.
pub const EXACT_CLUSTER_LIMIT: usize = 20;

pub fn jaccard(a: &BTreeSet<LandmarkId>, b: &BTreeSet<LandmarkId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoRule {
    /// A strict majority of the proposed routes agree.
    Agreement,
    /// A candidate matches a verified route.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Evaluation {
    Resolved { route: usize, confidence: f64, rule: AutoRule },
    /// Per-candidate confidence against the known truths.
    Escalate { confidences: Vec<f64> },
}

/// Each candidate counts once per source that proposed it, so merged
/// duplicates still carry their votes.
fn weight(c: &CandidateSet, i: usize) -> usize {
    c.routes()[i].provenance.len().max(1)
}

/// The heaviest set of pairwise-agreeing candidates, as `(members, weight)`.
/// Ties prefer fewer members, then the lexicographically smaller index list.
fn heaviest_cluster(c: &CandidateSet, tau: f64) -> (Vec<usize>, usize) {
    let n = c.len();
    let members: Vec<&BTreeSet<LandmarkId>> = c.memberships().collect();
    let agree = |i: usize, j: usize| jaccard(members[i], members[j]) >= tau;
    let mut best: (Vec<usize>, usize) = (Vec::new(), 0);
    let offer = |set: Vec<usize>, w: usize, best: &mut (Vec<usize>, usize)| {
        if w > best.1 || (w == best.1 && (set.len() < best.0.len() || (set.len() == best.0.len() && set < best.0))) {
            *best = (set, w);
        }
    };
    if n <= EXACT_CLUSTER_LIMIT {
        for mask in 1u32..(1u32 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if set.iter().enumerate().all(|(a, &i)| set[a + 1..].iter().all(|&j| agree(i, j))) {
                let w = set.iter().map(|&i| weight(c, i)).sum();
                offer(set, w, &mut best);
            }
        }
    } else {
        // Greedy growth from every seed.
        for seed in 0..n {
            let mut set = vec![seed];
            for j in 0..n {
                if j != seed && set.iter().all(|&i| agree(i, j)) {
                    set.push(j);
                }
            }
            set.sort_unstable();
            let w = set.iter().map(|&i| weight(c, i)).sum();
            offer(set, w, &mut best);
        }
    }
    best
}

/// Automatic evaluation of a candidate set.
///
/// First, if a cluster of candidates whose pairwise landmark Jaccard
/// similarity is at least `tau_agree` holds a strict majority of the
/// proposals, the member most similar to the rest of the cluster wins.
/// Otherwise each candidate's confidence is its best Jaccard similarity to a
/// verified route for the same trip, and the best candidate wins if its
/// confidence exceeds `eta`.
pub fn evaluate_candidates<'a>(
    c: &CandidateSet,
    truths: impl IntoIterator<Item = &'a LandmarkRoute>,
    eta: f64,
    tau_agree: f64,
) -> Evaluation {
    let total: usize = (0..c.len()).map(|i| weight(c, i)).sum();
    let (cluster, w) = heaviest_cluster(c, tau_agree);
    if 2 * w > total {
        let members: Vec<&BTreeSet<LandmarkId>> = c.memberships().collect();
        let mean_sim = |i: usize| {
            if cluster.len() == 1 {
                return 1.0;
            }
            cluster.iter().filter(|&&j| j != i).map(|&j| jaccard(members[i], members[j])).sum::<f64>() / (cluster.len() - 1) as f64
        };
        let route = cluster
            .iter()
            .copied()
            .max_by(|&a, &b| mean_sim(a).total_cmp(&mean_sim(b)).then_with(|| b.cmp(&a)))
            .expect("non-empty cluster");
        return Evaluation::Resolved { route, confidence: w as f64 / total as f64, rule: AutoRule::Agreement };
    }

    let truths: Vec<BTreeSet<LandmarkId>> = truths.into_iter().map(|t| t.membership()).collect();
    let confidences: Vec<f64> =
        c.memberships().map(|m| truths.iter().map(|t| jaccard(m, t)).fold(0.0, f64::max)).collect();
    let best = (0..confidences.len()).max_by(|&a, &b| confidences[a].total_cmp(&confidences[b]).then_with(|| b.cmp(&a)));
    match best {
        Some(i) if confidences[i] > eta => Evaluation::Resolved { route: i, confidence: confidences[i], rule: AutoRule::Truth },
        _ => Evaluation::Escalate { confidences },
    }
}
