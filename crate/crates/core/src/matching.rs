//! Bipartite matching of bins to layer groups (Kuhn's augmenting paths).
//!
//! Stacks hold at most a few dozen bins, so the simple `O(V * E)` algorithm is
//! plenty.

use std::ops::RangeInclusive;

/// Maximum matching between items and groups `1..=group_limit`, where item `i`
/// may take any group in `candidates[i]`.
///
/// Returns `assignment[i] = Some(group)` for matched items.
pub fn max_matching(
    candidates: &[RangeInclusive<usize>],
    group_limit: usize,
) -> Vec<Option<usize>> {
    let mut owner: Vec<Option<usize>> = vec![None; group_limit + 1];
    for item in 0..candidates.len() {
        let mut visited = vec![false; group_limit + 1];
        augment(item, candidates, group_limit, &mut owner, &mut visited);
    }
    let mut assignment = vec![None; candidates.len()];
    for (g, o) in owner.iter().enumerate() {
        if let Some(i) = o {
            assignment[*i] = Some(g);
        }
    }
    assignment
}

fn augment(
    item: usize,
    candidates: &[RangeInclusive<usize>],
    group_limit: usize,
    owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    let (lo, hi) = (*candidates[item].start(), *candidates[item].end());
    for g in lo.max(1)..=hi.min(group_limit) {
        if visited[g] {
            continue;
        }
        visited[g] = true;
        let free = match owner[g] {
            None => true,
            Some(other) => augment(other, candidates, group_limit, owner, visited),
        };
        if free {
            owner[g] = Some(item);
            return true;
        }
    }
    false
}

/// Size of a maximum matching.
pub fn matching_size(candidates: &[RangeInclusive<usize>], group_limit: usize) -> usize {
    max_matching(candidates, group_limit)
        .iter()
        .filter(|a| a.is_some())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmenting_path_reassigns() {
        // item 0 grabs group 1 first, item 1 can only use group 1
        let c = vec![1..=2, 1..=1];
        let a = max_matching(&c, 2);
        assert_eq!(a, vec![Some(2), Some(1)]);
    }

    #[test]
    fn limits_restrict_groups() {
        let c = vec![2..=3, 3..=3];
        assert_eq!(matching_size(&c, 3), 2);
        assert_eq!(matching_size(&c, 2), 1);
        assert_eq!(matching_size(&c, 1), 0);
    }

    #[test]
    fn duplicates_stay_unmatched() {
        let c = vec![1..=1, 1..=1, 2..=2];
        assert_eq!(matching_size(&c, 3), 2);
    }
}
