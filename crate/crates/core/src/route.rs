//! Raw and landmark-based routes, candidate sets, and the discriminativeness
//! predicates that landmark selection is built on.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geo::GeoPoint;
use crate::landmark::{LandmarkId, LandmarkIndex, SignificanceLookup};

/// Default snapping radius for [`calibrate`], in kilometers.
pub const DEFAULT_SNAP_RADIUS_KM: f64 = 0.3;

/// A continuous path: source, intermediate points, destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRoute {
    points: Vec<GeoPoint>,
}

impl RawRoute {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, ModelError> {
        if points.len() < 2 {
            return Err(ModelError::TooFewPoints(points.len()));
        }
        for p in &points {
            GeoPoint::new(p.lat, p.lon)?;
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn source(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn destination(&self) -> GeoPoint {
        self.points[self.points.len() - 1]
    }
}

/// A route written as a sequence of landmarks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LandmarkId>", into = "Vec<LandmarkId>")]
pub struct LandmarkRoute {
    ids: Vec<LandmarkId>,
}

impl LandmarkRoute {
    pub fn new(ids: Vec<LandmarkId>) -> Result<Self, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptyRoute);
        }
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::ConsecutiveDuplicate(w[0].clone()));
        }
        Ok(Self { ids })
    }

    /// Builds a route, dropping consecutive repeats instead of rejecting them.
    pub fn collapsed(ids: impl IntoIterator<Item = LandmarkId>) -> Result<Self, ModelError> {
        let mut out: Vec<LandmarkId> = Vec::new();
        for id in ids {
            if out.last() != Some(&id) {
                out.push(id);
            }
        }
        Self::new(out)
    }

    pub fn ids(&self) -> &[LandmarkId] {
        &self.ids
    }

    pub fn membership(&self) -> BTreeSet<LandmarkId> {
        self.ids.iter().cloned().collect()
    }

    pub fn contains(&self, id: &LandmarkId) -> bool {
        self.ids.contains(id)
    }
}

impl TryFrom<Vec<LandmarkId>> for LandmarkRoute {
    type Error = ModelError;

    fn try_from(ids: Vec<LandmarkId>) -> Result<Self, Self::Error> {
        Self::new(ids)
    }
}

impl From<LandmarkRoute> for Vec<LandmarkId> {
    fn from(r: LandmarkRoute) -> Self {
        r.ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub route: LandmarkRoute,
    /// Every source that proposed this route (several after merging).
    pub provenance: Vec<String>,
    #[serde(skip)]
    membership: BTreeSet<LandmarkId>,
}

impl Candidate {
    pub fn membership(&self) -> &BTreeSet<LandmarkId> {
        &self.membership
    }
}

/// Candidate routes with pairwise-distinct membership sets.
///
/// Routes whose membership sets coincide are merged on construction; the
/// first occurrence keeps its position and absorbs the others' provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    routes: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new<S: Into<String>>(routes: impl IntoIterator<Item = (LandmarkRoute, S)>) -> Result<Self, ModelError> {
        let mut merged: Vec<Candidate> = Vec::new();
        for (route, source) in routes {
            let membership = route.membership();
            let source = source.into();
            match merged.iter_mut().find(|c| c.membership == membership) {
                Some(existing) => {
                    if !existing.provenance.contains(&source) {
                        existing.provenance.push(source);
                    }
                }
                None => merged.push(Candidate { route, provenance: vec![source], membership }),
            }
        }
        if merged.is_empty() {
            return Err(ModelError::NoRoutes);
        }
        Ok(Self { routes: merged })
    }

    /// Convenience constructor for unlabelled routes given as id lists.
    pub fn from_ids<I, S>(routes: I) -> Result<Self, ModelError>
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let routes = routes
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let ids = r.into_iter().map(|s| LandmarkId(s.into())).collect();
                LandmarkRoute::new(ids).map(|r| (r, format!("r{}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(routes)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Candidate> {
        self.routes.get(i)
    }

    pub fn routes(&self) -> &[Candidate] {
        &self.routes
    }

    pub fn memberships(&self) -> impl Iterator<Item = &BTreeSet<LandmarkId>> {
        self.routes.iter().map(|c| &c.membership)
    }
}

impl<'de> Deserialize<'de> for CandidateSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            route: LandmarkRoute,
            provenance: Vec<String>,
        }
        #[derive(Deserialize)]
        struct WireSet {
            routes: Vec<Wire>,
        }
        let wire = WireSet::deserialize(d)?;
        let mut pairs = Vec::new();
        for w in wire.routes {
            for p in w.provenance {
                pairs.push((w.route.clone(), p));
            }
        }
        CandidateSet::new(pairs).map_err(serde::de::Error::custom)
    }
}

/// Snaps each raw point to its nearest landmark within `snap_radius_km`,
/// skips points with no landmark in range, and collapses consecutive repeats.
pub fn calibrate(raw: &RawRoute, index: &LandmarkIndex, snap_radius_km: f64) -> Result<LandmarkRoute, ModelError> {
    if !(snap_radius_km > 0.0) {
        return Err(ModelError::InvalidRadius(snap_radius_km));
    }
    let snapped = raw
        .points()
        .iter()
        .filter_map(|p| index.nearest_within(p, snap_radius_km).map(|(l, _)| l.id.clone()));
    LandmarkRoute::collapsed(snapped).map_err(|_| ModelError::EmptyCalibration)
}

/// True iff the joint sets `membership ∩ set` are pairwise distinct over all routes.
pub fn is_discriminative(set: &BTreeSet<LandmarkId>, routes: &CandidateSet) -> bool {
    let mut seen: HashSet<Vec<&LandmarkId>> = HashSet::with_capacity(routes.len());
    routes
        .memberships()
        .all(|m| seen.insert(m.intersection(set).collect()))
}

/// Discriminative, and no longer so after removing any single landmark.
pub fn is_simplest_discriminative(set: &BTreeSet<LandmarkId>, routes: &CandidateSet) -> bool {
    if !is_discriminative(set, routes) {
        return false;
    }
    set.iter().all(|l| {
        let mut smaller = set.clone();
        smaller.remove(l);
        !is_discriminative(&smaller, routes)
    })
}

/// Mean significance of `set`: the selection objective.
pub fn objective_value(set: &BTreeSet<LandmarkId>, lookup: &impl SignificanceLookup) -> Result<f64, ModelError> {
    if set.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let mut sum = 0.0;
    for id in set {
        sum += lookup.significance(id).ok_or_else(|| ModelError::UnknownLandmark(id.clone()))?;
    }
    Ok(sum / set.len() as f64)
}

/// Landmarks on some but not all candidate routes.
pub fn beneficial_landmarks(routes: &CandidateSet) -> BTreeSet<LandmarkId> {
    let mut iter = routes.memberships();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let (mut union, mut inter) = (first.clone(), first.clone());
    for m in iter {
        union.extend(m.iter().cloned());
        inter.retain(|l| m.contains(l));
    }
    union.difference(&inter).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::Landmark;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn set(ids: &[&str]) -> BTreeSet<LandmarkId> {
        ids.iter().map(|s| LandmarkId::from(*s)).collect()
    }

    fn two_routes() -> CandidateSet {
        CandidateSet::from_ids([vec!["l1", "l2", "l3"], vec!["l1", "l2", "l4"]]).unwrap()
    }

    #[test]
    fn worked_example_discriminative() {
        let r = two_routes();
        assert!(is_discriminative(&set(&["l3", "l4"]), &r));
        assert!(!is_discriminative(&set(&["l1", "l2"]), &r));
        assert!(!is_simplest_discriminative(&set(&["l3", "l4"]), &r));
        assert!(is_simplest_discriminative(&set(&["l3"]), &r));
        assert!(is_simplest_discriminative(&set(&["l4"]), &r));
    }

    #[test]
    fn empty_set_discriminates_a_single_route() {
        let r = CandidateSet::from_ids([vec!["a", "b"]]).unwrap();
        assert!(is_discriminative(&BTreeSet::new(), &r));
    }

    #[test]
    fn objective_values() {
        let s: BTreeMap<LandmarkId, f64> = [("l3".into(), 0.5), ("l4".into(), 0.3)].into_iter().collect();
        assert_eq!(objective_value(&set(&["l3"]), &s).unwrap(), 0.5);
        assert!((objective_value(&set(&["l3", "l4"]), &s).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(objective_value(&BTreeSet::new(), &s), Err(ModelError::EmptySet));
        assert_eq!(objective_value(&set(&["zz"]), &s), Err(ModelError::UnknownLandmark("zz".into())));
    }

    #[test]
    fn beneficial_is_union_minus_intersection() {
        assert_eq!(beneficial_landmarks(&two_routes()), set(&["l3", "l4"]));
    }

    #[test]
    fn duplicates_merge_with_provenance() {
        let a = LandmarkRoute::new(vec!["x".into(), "y".into()]).unwrap();
        let b = LandmarkRoute::new(vec!["y".into(), "x".into()]).unwrap();
        let c = CandidateSet::new([(a, "mpr"), (b, "ldr")]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.routes()[0].provenance, vec!["mpr".to_string(), "ldr".to_string()]);
    }

    #[test]
    fn landmark_route_invariants() {
        assert_eq!(LandmarkRoute::new(vec![]), Err(ModelError::EmptyRoute));
        assert!(matches!(
            LandmarkRoute::new(vec!["a".into(), "a".into()]),
            Err(ModelError::ConsecutiveDuplicate(_))
        ));
        assert_eq!(LandmarkRoute::collapsed(["a".into(), "a".into(), "b".into()]).unwrap().ids().len(), 2);
    }

    #[test]
    fn candidate_set_serde_roundtrip() {
        let c = two_routes();
        let json = serde_json::to_string(&c).unwrap();
        let back: CandidateSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    fn grid_index() -> LandmarkIndex {
        let origin = GeoPoint { lat: 40.0, lon: -3.7 };
        let ls = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .map(|(i, j)| Landmark {
                id: LandmarkId(format!("g{i}{j}")),
                name: String::new(),
                location: origin.offset_km(i as f64, j as f64),
                significance: 0.0,
            })
            .collect();
        LandmarkIndex::new(ls).unwrap()
    }

    #[test]
    fn calibrate_exact_points() {
        let idx = grid_index();
        let pts = ["g00", "g01", "g11"].iter().map(|id| idx.get(&(*id).into()).unwrap().location).collect();
        let r = calibrate(&RawRoute::new(pts).unwrap(), &idx, 0.3).unwrap();
        let ids: Vec<&str> = r.ids().iter().map(|i| i.as_str()).collect();
        assert_eq!(ids, ["g00", "g01", "g11"]);
    }

    #[test]
    fn calibrate_collapses_repeats() {
        let idx = grid_index();
        let g00 = idx.get(&"g00".into()).unwrap().location;
        let pts = vec![g00, g00.offset_km(0.05, 0.0), g00.offset_km(0.0, 0.1), g00.offset_km(0.0, 1.0)];
        let r = calibrate(&RawRoute::new(pts).unwrap(), &idx, 0.3).unwrap();
        let ids: Vec<&str> = r.ids().iter().map(|i| i.as_str()).collect();
        assert_eq!(ids, ["g00", "g01"]);
    }

    #[test]
    fn calibrate_far_route_fails() {
        let idx = grid_index();
        let far = GeoPoint { lat: 10.0, lon: 10.0 };
        let raw = RawRoute::new(vec![far, far.offset_km(1.0, 1.0)]).unwrap();
        assert_eq!(calibrate(&raw, &idx, 0.3), Err(ModelError::EmptyCalibration));
        assert_eq!(calibrate(&raw, &idx, 0.0), Err(ModelError::InvalidRadius(0.0)));
    }

    #[test]
    fn calibrate_matches_brute_force_nearest_scan() {
        let idx = grid_index();
        let origin = GeoPoint { lat: 40.0, lon: -3.7 };
        // Five points jittered around the grid; some fall outside every snap circle.
        let offsets = [(0.1, 0.2), (0.4, 0.45), (1.2, 0.9), (2.0, 2.3), (3.45, 3.9)];
        let pts: Vec<GeoPoint> = offsets.iter().map(|(n, e)| origin.offset_km(*n, *e)).collect();
        let got = calibrate(&RawRoute::new(pts.clone()).unwrap(), &idx, 0.5).unwrap();

        let mut expected: Vec<LandmarkId> = Vec::new();
        for p in &pts {
            let best = idx
                .iter()
                .map(|l| (p.distance_km(&l.location), &l.id))
                .filter(|(d, _)| *d <= 0.5)
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            if let Some((_, id)) = best {
                if expected.last() != Some(id) {
                    expected.push(id.clone());
                }
            }
        }
        assert_eq!(got.ids(), expected.as_slice());
        assert_eq!(expected.len(), 4);
    }

    fn routes_strategy() -> impl Strategy<Value = CandidateSet> {
        prop::collection::vec(prop::collection::btree_set(0u8..12, 1..8), 2..6).prop_filter_map(
            "need two distinct routes",
            |rs| {
                let c = CandidateSet::from_ids(rs.iter().map(|r| r.iter().map(|i| format!("l{i}")).collect::<Vec<_>>())).ok()?;
                (c.len() >= 2).then_some(c)
            },
        )
    }

    proptest! {
        #[test]
        fn beneficial_set_properties(routes in routes_strategy(), extra in prop::collection::btree_set(0u8..12, 0..12)) {
            let b = beneficial_landmarks(&routes);
            // Direct set-algebra oracle.
            let all: BTreeSet<LandmarkId> = routes.memberships().flatten().cloned().collect();
            let oracle: BTreeSet<LandmarkId> = all.iter()
                .filter(|l| !routes.memberships().all(|m| m.contains(*l)))
                .cloned().collect();
            prop_assert_eq!(&b, &oracle);
            prop_assert!(is_discriminative(&b, &routes));

            // Monotonicity and irrelevance of non-beneficial landmarks.
            let l: BTreeSet<LandmarkId> = extra.iter().map(|i| LandmarkId(format!("l{i}"))).collect();
            let restricted: BTreeSet<LandmarkId> = l.intersection(&b).cloned().collect();
            prop_assert_eq!(is_discriminative(&l, &routes), is_discriminative(&restricted, &routes));
            if is_discriminative(&l, &routes) {
                let bigger: BTreeSet<LandmarkId> = l.union(&b).cloned().collect();
                prop_assert!(is_discriminative(&bigger, &routes));
            }
            if is_simplest_discriminative(&l, &routes) {
                prop_assert!(l.is_subset(&b));
            }
        }

        #[test]
        fn objective_scales_linearly(vals in prop::collection::vec(0.0f64..1.0, 1..8), c in 0.01f64..10.0) {
            let ids: Vec<LandmarkId> = (0..vals.len()).map(|i| LandmarkId(format!("l{i}"))).collect();
            let s: BTreeMap<LandmarkId, f64> = ids.iter().cloned().zip(vals.iter().copied()).collect();
            let scaled: BTreeMap<LandmarkId, f64> = ids.iter().cloned().zip(vals.iter().map(|v| v * c)).collect();
            let all: BTreeSet<LandmarkId> = ids.into_iter().collect();
            let a = objective_value(&all, &s).unwrap();
            let b = objective_value(&all, &scaled).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn calibrate_is_idempotent_on_landmark_routes() {
        let idx = grid_index();
        let route = ["g00", "g10", "g11", "g21", "g22"];
        let pts = route.iter().map(|id| idx.get(&(*id).into()).unwrap().location).collect();
        let once = calibrate(&RawRoute::new(pts).unwrap(), &idx, 0.3).unwrap();
        let again_pts = once.ids().iter().map(|id| idx.get(id).unwrap().location).collect();
        let twice = calibrate(&RawRoute::new(again_pts).unwrap(), &idx, 0.3).unwrap();
        assert_eq!(once, twice);
    }
}
