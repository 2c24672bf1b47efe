use super::{consider, Algorithm, Mask, SelectionProblem, SelectionResult, SelectionStats};
use crate::error::SelectError;

/// Largest beneficial set the exhaustive solver will accept.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Tests every non-empty subset of the beneficial landmarks.
pub fn brute_force_select(p: &SelectionProblem) -> Result<SelectionResult, SelectError> {
    if p.len() > BRUTE_FORCE_LIMIT {
        return Err(SelectError::TooLarge { size: p.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let (lo, hi) = p.size_range();
    let mut stats = SelectionStats::default();
    let mut best = None;
    for set in 1..(1 as Mask) << p.len() {
        stats.sets_tested += 1;
        let size = set.count_ones() as usize;
        if p.is_discriminative(set) && (lo..=hi).contains(&size) {
            consider(p, &mut best, set);
        }
    }
    p.finish(best, Algorithm::Brute, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::LandmarkId;
    use crate::route::{is_simplest_discriminative, CandidateSet};
    use crate::select::SelectOptions;
    use std::collections::BTreeMap;

    fn sig(pairs: &[(&str, f64)]) -> BTreeMap<LandmarkId, f64> {
        pairs.iter().map(|(k, v)| (LandmarkId::from(*k), *v)).collect()
    }

    #[test]
    fn two_route_example() {
        // Feasible sets: {l3}=0.9, {l4}=0.2, {l3,l4}=0.55.
        let routes = CandidateSet::from_ids([vec!["l1", "l2", "l3"], vec!["l1", "l2", "l4"]]).unwrap();
        let s = sig(&[("l1", 1.0), ("l2", 1.0), ("l3", 0.9), ("l4", 0.2)]);
        let p = SelectionProblem::new(&routes, &s, SelectOptions::default()).unwrap();
        let r = brute_force_select(&p).unwrap();
        assert_eq!(r.chosen, ["l3".into()].into_iter().collect());
        assert_eq!(r.value, 0.9);
        assert_eq!(r.stats.sets_tested, 3);
    }

    #[test]
    fn equal_significance_yields_simplest_set() {
        let routes = CandidateSet::from_ids([vec!["a", "b"], vec!["b", "c"], vec!["c", "d"], vec!["d"]]).unwrap();
        let s = sig(&[("a", 0.5), ("b", 0.5), ("c", 0.5), ("d", 0.5)]);
        let p = SelectionProblem::new(&routes, &s, SelectOptions::default()).unwrap();
        let r = brute_force_select(&p).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(is_simplest_discriminative(&r.chosen, &routes));
    }

    #[test]
    fn guard_rejects_large_instances() {
        let routes = CandidateSet::from_ids((0..22).map(|i| vec![format!("l{i}")])).unwrap();
        let s: BTreeMap<LandmarkId, f64> = (0..22).map(|i| (LandmarkId(format!("l{i}")), 0.5)).collect();
        let p = SelectionProblem::new(&routes, &s, SelectOptions::default()).unwrap();
        assert_eq!(brute_force_select(&p).unwrap_err(), SelectError::TooLarge { size: 22, limit: 20 });
    }
}
