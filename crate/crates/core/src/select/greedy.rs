use super::{highest_bit, Algorithm, Mask, SelectionProblem, SelectionResult, SelectionStats, Scored};
use crate::error::SelectError;

/// Depth-first expansion in descending significance order. A set that turns
/// discriminative is scored together with its best fills and not expanded
/// further: all its supersets are discriminative and no better than those fills.
pub fn greedy_select(p: &SelectionProblem) -> Result<SelectionResult, SelectError> {
    let mut stats = SelectionStats::default();
    let mut best = None;
    let depth_limit = p.route_count().min(p.len());
    expand(p, 0, depth_limit, &mut stats, &mut best);
    p.finish(best, Algorithm::Greedy, stats)
}

fn expand(p: &SelectionProblem, set: Mask, depth_limit: usize, stats: &mut SelectionStats, best: &mut Option<Scored>) {
    stats.nodes_expanded += 1;
    let start = highest_bit(set).map_or(0, |h| h + 1);
    for j in start..p.len() {
        let next = set | (1 << j);
        stats.sets_tested += 1;
        if p.is_discriminative(next) {
            p.best_fill(next, best);
        } else if (next.count_ones() as usize) < depth_limit {
            expand(p, next, depth_limit, stats, best);
        }
    }
}
