//! Adaptive question order: an ID3 decision tree over the selected landmarks
//! whose leaves are candidate routes. Each split maximizes information
//! strength, the landmark's significance times the information gain of
//! splitting the surviving routes, with routes taken as equally likely.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::TreeError;
use crate::landmark::{LandmarkId, SignificanceLookup};
use crate::route::CandidateSet;

/// Entropy in bits of a uniform distribution over `n` routes.
fn uniform_entropy(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).log2()
    }
}

/// Gain in bits of splitting `total` equally likely routes into `yes` and
/// `total - yes`. An empty side contributes nothing.
pub fn information_gain(total: usize, yes: usize) -> f64 {
    assert!(yes <= total && total > 0, "invalid split {yes}/{total}");
    let no = total - yes;
    let t = total as f64;
    uniform_entropy(total) - (yes as f64 / t) * uniform_entropy(yes) - (no as f64 / t) * uniform_entropy(no)
}

/// Information strength of asking about `landmark` on the given route subset.
pub fn information_strength<'a>(
    landmark: &LandmarkId,
    subset: impl IntoIterator<Item = &'a BTreeSet<LandmarkId>>,
    significance: f64,
) -> f64 {
    let (total, yes) = subset
        .into_iter()
        .fold((0, 0), |(t, y), m| (t + 1, y + usize::from(m.contains(landmark))));
    significance * information_gain(total, yes)
}

/// Same as [`information_strength`] over a whole candidate set.
pub fn information_strength_on(landmark: &LandmarkId, routes: &CandidateSet, significance: f64) -> f64 {
    information_strength(landmark, routes.memberships(), significance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuestionNode {
    Question {
        landmark: LandmarkId,
        yes: Box<QuestionNode>,
        no: Box<QuestionNode>,
    },
    Leaf {
        route: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTree {
    pub root: QuestionNode,
}

/// One answered question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub landmark: LandmarkId,
    pub yes: bool,
}

pub type AnswerTrace = Vec<Answer>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NextStep {
    /// Ask about this landmark next.
    Ask { landmark: LandmarkId },
    /// The trace has reached this candidate route.
    Resolved { route: usize },
}

impl QuestionTree {
    /// Walks the tree along `trace`.
    pub fn next_question(&self, trace: &[Answer]) -> Result<NextStep, TreeError> {
        let mut node = &self.root;
        for (step, a) in trace.iter().enumerate() {
            match node {
                QuestionNode::Question { landmark, yes, no } if *landmark == a.landmark => {
                    node = if a.yes { yes } else { no };
                }
                _ => return Err(TreeError::InvalidTrace { step }),
            }
        }
        Ok(match node {
            QuestionNode::Question { landmark, .. } => NextStep::Ask { landmark: landmark.clone() },
            QuestionNode::Leaf { route } => NextStep::Resolved { route: *route },
        })
    }

    /// Every leaf with the answer path leading to it, in depth-first (yes-first) order.
    pub fn leaves(&self) -> Vec<(usize, AnswerTrace)> {
        fn walk(node: &QuestionNode, path: &mut AnswerTrace, out: &mut Vec<(usize, AnswerTrace)>) {
            match node {
                QuestionNode::Leaf { route } => out.push((*route, path.clone())),
                QuestionNode::Question { landmark, yes, no } => {
                    for (ans, child) in [(true, yes), (false, no)] {
                        path.push(Answer { landmark: landmark.clone(), yes: ans });
                        walk(child, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Longest root-to-leaf path, in questions.
    pub fn depth(&self) -> usize {
        self.leaves().iter().map(|(_, p)| p.len()).max().unwrap_or(0)
    }

    /// Answer path to the leaf holding `route`.
    pub fn path_to(&self, route: usize) -> Option<AnswerTrace> {
        self.leaves().into_iter().find(|(r, _)| *r == route).map(|(_, p)| p)
    }

    /// Mean number of questions when every route is equally likely.
    pub fn expected_questions(&self) -> f64 {
        let leaves = self.leaves();
        leaves.iter().map(|(_, p)| p.len() as f64).sum::<f64>() / leaves.len() as f64
    }
}

/// Builds the question tree for `selected` over `routes`.
///
/// At each node the landmark with the largest information strength among
/// those that split the surviving routes is asked; ties go to the higher
/// significance, then the smaller id.
pub fn build_tree(
    selected: &BTreeSet<LandmarkId>,
    routes: &CandidateSet,
    lookup: &impl SignificanceLookup,
) -> Result<QuestionTree, TreeError> {
    let questions = selected
        .iter()
        .map(|id| lookup.significance(id).map(|s| (id.clone(), s)).ok_or_else(|| TreeError::UnknownLandmark(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let memberships: Vec<&BTreeSet<LandmarkId>> = routes.memberships().collect();
    let subset: Vec<usize> = (0..routes.len()).collect();
    let root = grow(&subset, &questions, &memberships)?;
    Ok(QuestionTree { root })
}

fn grow(subset: &[usize], questions: &[(LandmarkId, f64)], memberships: &[&BTreeSet<LandmarkId>]) -> Result<QuestionNode, TreeError> {
    if let [route] = subset {
        return Ok(QuestionNode::Leaf { route: *route });
    }
    let mut best: Option<(usize, f64)> = None;
    for (qi, (id, s)) in questions.iter().enumerate() {
        let yes = subset.iter().filter(|&&r| memberships[r].contains(id)).count();
        if yes == 0 || yes == subset.len() {
            continue;
        }
        let strength = s * information_gain(subset.len(), yes);
        let better = match best {
            None => true,
            Some((bi, bs)) => {
                let (bid, bsig) = &questions[bi];
                if (strength - bs).abs() > 1e-12 {
                    strength > bs
                } else if s != bsig {
                    s > bsig
                } else {
                    id < bid
                }
            }
        };
        if better {
            best = Some((qi, strength));
        }
    }
    let Some((qi, _)) = best else {
        return Err(TreeError::NotDiscriminative(subset.to_vec()));
    };
    let landmark = &questions[qi].0;
    let (yes, no): (Vec<usize>, Vec<usize>) = subset.iter().partition(|&&r| memberships[r].contains(landmark));
    let rest: Vec<(LandmarkId, f64)> = questions.iter().enumerate().filter(|(i, _)| *i != qi).map(|(_, q)| q.clone()).collect();
    Ok(QuestionNode::Question {
        landmark: landmark.clone(),
        yes: Box::new(grow(&yes, &rest, memberships)?),
        no: Box::new(grow(&no, &rest, memberships)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn set(ids: &[&str]) -> BTreeSet<LandmarkId> {
        ids.iter().map(|s| LandmarkId::from(*s)).collect()
    }

    fn sig(pairs: &[(&str, f64)]) -> BTreeMap<LandmarkId, f64> {
        pairs.iter().map(|(k, v)| (LandmarkId::from(*k), *v)).collect()
    }

    fn split(total: usize, yes: usize) -> Vec<BTreeSet<LandmarkId>> {
        (0..total).map(|i| if i < yes { set(&["q"]) } else { set(&[]) }).collect()
    }

    #[test]
    fn balanced_split_is_one_bit() {
        let q = LandmarkId::from("q");
        assert_eq!(information_strength(&q, &split(4, 2), 1.0), 1.0);
        assert_eq!(information_strength(&q, &split(4, 2), 0.5), 0.5);
        assert_eq!(information_strength(&q, &split(4, 2), 0.0), 0.0);
    }

    #[test]
    fn uneven_split() {
        // 2 - 0.25*log2(1) - 0.75*log2(3), computed by hand.
        let q = LandmarkId::from("q");
        assert_abs_diff_eq!(information_strength(&q, &split(4, 1), 1.0), 0.811278, epsilon = 1e-4);
        assert_eq!(information_strength(&q, &split(4, 0), 1.0), 0.0);
        assert_eq!(information_strength(&q, &split(4, 4), 1.0), 0.0);
    }

    #[test]
    fn two_route_tree() {
        let routes = CandidateSet::from_ids([vec!["l1", "l2", "l3"], vec!["l1", "l2", "l4"]]).unwrap();
        let t = build_tree(&set(&["l3"]), &routes, &sig(&[("l3", 0.9)])).unwrap();
        assert_eq!(
            t.root,
            QuestionNode::Question {
                landmark: "l3".into(),
                yes: Box::new(QuestionNode::Leaf { route: 0 }),
                no: Box::new(QuestionNode::Leaf { route: 1 }),
            }
        );
    }

    #[test]
    fn complete_depth_two_tree() {
        // x splits 2/2 at the root (IS = 0.8 vs y's 0.6); y then splits each half 1/1.
        let routes = CandidateSet::from_ids([vec!["c", "x", "y"], vec!["c", "x"], vec!["c", "y"], vec!["c"]]).unwrap();
        let t = build_tree(&set(&["x", "y"]), &routes, &sig(&[("x", 0.8), ("y", 0.6)])).unwrap();
        let QuestionNode::Question { landmark, yes, no } = &t.root else { panic!("leaf root") };
        assert_eq!(landmark.as_str(), "x");
        for child in [yes, no] {
            assert!(matches!(&**child, QuestionNode::Question { landmark, .. } if landmark.as_str() == "y"));
        }
        assert_eq!(t.leaves().len(), 4);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn significance_outweighs_balance_when_large_enough() {
        // a: 2/2 split, s=0.3 -> 0.3. b: 1/3 split, s=1 -> 0.811.
        let routes = CandidateSet::from_ids([vec!["a", "b"], vec!["a"], vec!["c"], vec!["d"]]).unwrap();
        let t = build_tree(&set(&["a", "b", "c"]), &routes, &sig(&[("a", 0.3), ("b", 1.0), ("c", 0.1)])).unwrap();
        assert!(matches!(&t.root, QuestionNode::Question { landmark, .. } if landmark.as_str() == "b"));
    }

    #[test]
    fn non_discriminative_selection_fails() {
        let routes = CandidateSet::from_ids([vec!["a"], vec!["b"], vec!["c"]]).unwrap();
        let err = build_tree(&set(&["a"]), &routes, &sig(&[("a", 1.0)])).unwrap_err();
        assert_eq!(err, TreeError::NotDiscriminative(vec![1, 2]));
    }

    #[test]
    fn traversal() {
        let routes = CandidateSet::from_ids([vec!["c", "x", "y"], vec!["c", "x"], vec!["c", "y"], vec!["c"]]).unwrap();
        let t = build_tree(&set(&["x", "y"]), &routes, &sig(&[("x", 0.8), ("y", 0.6)])).unwrap();
        assert_eq!(t.next_question(&[]).unwrap(), NextStep::Ask { landmark: "x".into() });
        let trace = vec![Answer { landmark: "x".into(), yes: false }, Answer { landmark: "y".into(), yes: true }];
        assert_eq!(t.next_question(&trace).unwrap(), NextStep::Resolved { route: 2 });
        let bad = vec![Answer { landmark: "y".into(), yes: true }];
        assert_eq!(t.next_question(&bad).unwrap_err(), TreeError::InvalidTrace { step: 0 });
        let mut long = trace.clone();
        long.push(Answer { landmark: "x".into(), yes: true });
        assert_eq!(t.next_question(&long).unwrap_err(), TreeError::InvalidTrace { step: 2 });
    }

    #[test]
    fn tree_serializes_as_nested_records() {
        let routes = CandidateSet::from_ids([vec!["a"], vec!["b"]]).unwrap();
        let t = build_tree(&set(&["a"]), &routes, &sig(&[("a", 1.0)])).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"root": {"kind": "question", "landmark": "a",
                "yes": {"kind": "leaf", "route": 0}, "no": {"kind": "leaf", "route": 1}}})
        );
        let back: QuestionTree = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
    }
}
