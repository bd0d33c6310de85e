//! Optimal bin grid configurations, layer groups and the distance to
//! layer-completeness.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::cost::{expected_cost, CostTable};
use crate::error::{Error, Result};
use crate::matching::{matching_size, max_matching};
use crate::model::{pad_with_empty_bins, BinCatalog, BinId, Bgc, GridSpec, EMPTY};

/// Builds the canonical optimal configuration at `empty_level`.
///
/// `catalog` must already be padded so that the fill level divides its size.
/// Bins `1..=m_f` fill the surface layer left to right, the next `m_f` bins
/// the layer below, and so on.
pub fn build_optimal_bgc(spec: &GridSpec, catalog: &BinCatalog, empty_level: usize) -> Result<Bgc> {
    let height = spec.height;
    if empty_level >= height {
        return Err(Error::Domain(format!(
            "empty level {empty_level} leaves no room in stacks of height {height}"
        )));
    }
    let fill = height - empty_level;
    let n = catalog.len();
    if !n.is_multiple_of(fill) {
        return Err(Error::Validation(format!(
            "{n} bins do not divide into stacks of {fill}; pad the catalog first"
        )));
    }
    let occupied = n / fill;
    let capacity = spec.stack_count() - usize::from(spec.buffer_stack.is_some());
    if occupied > capacity {
        return Err(Error::Capacity(format!(
            "{occupied} occupied stacks needed, {capacity} available"
        )));
    }
    let mut stacks = vec![Vec::with_capacity(height); spec.stack_count()];
    // bottom layer first so pushes respect gravity
    for group in (0..fill).rev() {
        for (m, stack) in stacks.iter_mut().enumerate().take(occupied) {
            stack.push((group * occupied + m + 1) as BinId);
        }
    }
    Bgc::from_stacks(height, stacks)
}

/// Expected cost of the optimal configuration at one candidate empty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyLevelCandidate {
    pub empty_level: usize,
    pub occupied_stacks: usize,
    /// `None` when the candidate does not fit the grid.
    pub expected_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyLevelSearch {
    pub best: usize,
    pub candidates: Vec<EmptyLevelCandidate>,
}

/// Evaluates every admissible empty level `0..=H - floor(H(1 - tau))` and
/// returns the cheapest, ties going to the smaller level.
pub fn optimal_empty_level(
    spec: &GridSpec,
    catalog: &BinCatalog,
    table: &CostTable,
) -> Result<EmptyLevelSearch> {
    optimal_empty_level_in(spec, catalog, table, 0..=spec.max_empty_level())
}

/// As [`optimal_empty_level`] over an explicit candidate range.
pub fn optimal_empty_level_in(
    spec: &GridSpec,
    catalog: &BinCatalog,
    table: &CostTable,
    levels: RangeInclusive<usize>,
) -> Result<EmptyLevelSearch> {
    let mut candidates = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for he in levels {
        if he >= spec.height {
            break;
        }
        let padded = pad_with_empty_bins(spec.height - he, catalog);
        let occupied = padded.len() / (spec.height - he);
        let expected = match build_optimal_bgc(spec, &padded, he) {
            Ok(bgc) => Some(expected_cost(&bgc, &padded, table)?),
            Err(Error::Capacity(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(e) = expected {
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((he, e));
            }
        }
        candidates.push(EmptyLevelCandidate {
            empty_level: he,
            occupied_stacks: occupied,
            expected_cost: expected,
        });
    }
    let (best, _) = best.ok_or_else(|| {
        Error::Capacity("no candidate empty level fits the grid".into())
    })?;
    Ok(EmptyLevelSearch { best, candidates })
}

/// Layer-group membership of every bin.
///
/// Group `g` holds the bins of layer `h_e + g` of an optimal configuration. A
/// bin whose popularity equals that of bins in other groups may be classified
/// into any of them; those candidate groups always form a contiguous range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGroupAssignment {
    fill_level: usize,
    occupied: usize,
    own_group: Vec<usize>,
    candidates: Vec<RangeInclusive<usize>>,
    equality_classes: Vec<Vec<BinId>>,
    group_popularity: Vec<Vec<f64>>,
}

impl LayerGroupAssignment {
    /// Groups by popularity rank: bin `n` joins group `(n - 1) / m_f + 1`.
    pub fn from_catalog(catalog: &BinCatalog, occupied: usize) -> Result<Self> {
        if occupied == 0 || !catalog.len().is_multiple_of(occupied) {
            return Err(Error::Validation(format!(
                "{} bins do not split evenly over {occupied} stacks",
                catalog.len()
            )));
        }
        let own: Vec<usize> = (0..catalog.len()).map(|i| i / occupied + 1).collect();
        Ok(Self::from_groups(catalog, occupied, own))
    }

    fn from_groups(catalog: &BinCatalog, occupied: usize, own_group: Vec<usize>) -> Self {
        let fill_level = catalog.len() / occupied;
        // popularity bits -> (min group, max group, members)
        let mut by_value: BTreeMap<u64, (usize, usize, Vec<BinId>)> = BTreeMap::new();
        for (i, &g) in own_group.iter().enumerate() {
            let key = catalog.popularities()[i].to_bits();
            let e = by_value.entry(key).or_insert((g, g, Vec::new()));
            e.0 = e.0.min(g);
            e.1 = e.1.max(g);
            e.2.push(i as BinId + 1);
        }
        let candidates = (0..own_group.len())
            .map(|i| {
                let (lo, hi, _) = &by_value[&catalog.popularities()[i].to_bits()];
                *lo..=*hi
            })
            .collect();
        let mut equality_classes: Vec<Vec<BinId>> =
            by_value.into_values().map(|(_, _, bins)| bins).collect();
        equality_classes.sort();
        let mut group_popularity = vec![Vec::<f64>::new(); fill_level];
        for (i, &g) in own_group.iter().enumerate() {
            let p = catalog.popularities()[i];
            let values = &mut group_popularity[g - 1];
            if !values.contains(&p) {
                values.push(p);
            }
        }
        Self {
            fill_level,
            occupied,
            own_group,
            candidates,
            equality_classes,
            group_popularity,
        }
    }

    /// Number of groups, equal to the fill level `h_c`.
    pub fn fill_level(&self) -> usize {
        self.fill_level
    }

    /// Number of occupied stacks `m_f`; these are stacks `0..m_f`.
    pub fn occupied_stacks(&self) -> usize {
        self.occupied
    }

    pub fn bin_count(&self) -> usize {
        self.own_group.len()
    }

    pub fn group_of(&self, bin: BinId) -> usize {
        self.own_group[bin as usize - 1]
    }

    /// Groups `bin` may be classified into.
    pub fn candidates(&self, bin: BinId) -> RangeInclusive<usize> {
        self.candidates[bin as usize - 1].clone()
    }

    pub fn equality_classes(&self) -> &[Vec<BinId>] {
        &self.equality_classes
    }

    /// Distinct popularity values carried by members of `group`.
    pub fn group_popularity(&self, group: usize) -> &[f64] {
        &self.group_popularity[group - 1]
    }

    pub fn interchangeable(&self, a: BinId, b: BinId) -> bool {
        self.equality_classes
            .iter()
            .any(|c| c.contains(&a) && c.contains(&b))
    }

    fn candidate_list(&self, bins: &[BinId]) -> Vec<RangeInclusive<usize>> {
        bins.iter()
            .filter(|&&b| b != EMPTY)
            .map(|&b| self.candidates(b))
            .collect()
    }

    /// Largest number of distinct groups `1..=limit` that `bins` can cover.
    pub fn coverage(&self, bins: &[BinId], limit: usize) -> usize {
        matching_size(&self.candidate_list(bins), limit.min(self.fill_level))
    }

    /// A classification of `bins` that covers the most groups; unmatched bins
    /// get their own group.
    pub fn classify(&self, bins: &[BinId]) -> Vec<usize> {
        let bins: Vec<BinId> = bins.iter().copied().filter(|&b| b != EMPTY).collect();
        let assignment = max_matching(&self.candidate_list(&bins), self.fill_level);
        bins.iter()
            .zip(assignment)
            .map(|(&b, a)| a.unwrap_or_else(|| self.group_of(b)))
            .collect()
    }

    /// Distance of one stack to a layer-complete stack,
    /// `|S| + h_c - 2 * coverage(S)`.
    pub fn stack_deficit(&self, bins: &[BinId]) -> usize {
        let size = bins.iter().filter(|&&b| b != EMPTY).count();
        size + self.fill_level - 2 * self.coverage(bins, self.fill_level)
    }

    /// Number of groups a quasi-equivalent configuration must cover,
    /// `ceil(h_c * eps)` clamped to `1..=h_c`.
    pub fn quasi_group_count(&self, epsilon: f64) -> usize {
        let raw = (self.fill_level as f64 * epsilon - 1e-9).ceil();
        (raw.max(1.0) as usize).min(self.fill_level)
    }
}

/// Reads layer groups off an optimal configuration.
pub fn assign_layer_groups(optimal: &Bgc, catalog: &BinCatalog) -> Result<LayerGroupAssignment> {
    let fill = crate::cost::uniform_fill_level(optimal)?;
    let he = optimal.height() - fill;
    let occupied = (0..optimal.stack_count())
        .filter(|&m| optimal.fill_level(m) > 0)
        .count();
    if occupied * fill != catalog.len() {
        return Err(Error::Validation(format!(
            "configuration holds {} bins, catalog has {}",
            occupied * fill,
            catalog.len()
        )));
    }
    let mut own = vec![0; catalog.len()];
    for m in 0..optimal.stack_count() {
        for l in he + 1..=optimal.height() {
            let b = optimal.cell(l, m);
            if b != EMPTY {
                own[b as usize - 1] = l - he;
            }
        }
    }
    Ok(LayerGroupAssignment::from_groups(catalog, occupied, own))
}

/// True iff the stack holds exactly `h_c` bins that classify onto every group
/// once.
pub fn is_layer_complete(stack_bins: &[BinId], groups: &LayerGroupAssignment) -> bool {
    let bins: Vec<BinId> = stack_bins.iter().copied().filter(|&b| b != EMPTY).collect();
    bins.len() == groups.fill_level() && groups.coverage(&bins, groups.fill_level()) == bins.len()
}

/// True iff every occupied stack is layer-complete.
pub fn is_equivalent_optimal(bgc: &Bgc, groups: &LayerGroupAssignment) -> bool {
    sets_equivalent_optimal(&bgc.stack_sets(), groups)
}

pub fn sets_equivalent_optimal(stacks: &[Vec<BinId>], groups: &LayerGroupAssignment) -> bool {
    stacks
        .iter()
        .take(groups.occupied_stacks())
        .all(|s| is_layer_complete(s, groups))
}

/// True iff every occupied stack covers groups `1..=ceil(h_c * eps)`.
pub fn is_quasi_equivalent_optimal(bgc: &Bgc, groups: &LayerGroupAssignment, epsilon: f64) -> bool {
    sets_quasi_equivalent_optimal(&bgc.stack_sets(), groups, epsilon)
}

pub fn sets_quasi_equivalent_optimal(
    stacks: &[Vec<BinId>],
    groups: &LayerGroupAssignment,
    epsilon: f64,
) -> bool {
    let k = groups.quasi_group_count(epsilon);
    stacks
        .iter()
        .take(groups.occupied_stacks())
        .all(|s| groups.coverage(s, k) == k)
}

/// Size of the symmetric multiset difference of two group-label multisets.
pub fn stack_distance(a: &[usize], b: &[usize]) -> usize {
    let mut count: BTreeMap<usize, isize> = BTreeMap::new();
    for &x in a {
        *count.entry(x).or_default() += 1;
    }
    for &x in b {
        *count.entry(x).or_default() -= 1;
    }
    count.values().map(|c| c.unsigned_abs()).sum()
}

/// Sum over occupied stacks of the distance to `{1, ..., h_c}`.
pub fn distance_to_equivalent_optimal(bgc: &Bgc, groups: &LayerGroupAssignment) -> usize {
    sets_distance(&bgc.stack_sets(), groups)
}

pub fn sets_distance(stacks: &[Vec<BinId>], groups: &LayerGroupAssignment) -> usize {
    let complete: Vec<usize> = (1..=groups.fill_level()).collect();
    stacks
        .iter()
        .take(groups.occupied_stacks())
        .map(|s| stack_distance(&groups.classify(s), &complete))
        .sum()
}

/// Largest coupon count accepted by [`expected_transform_requests`].
pub const MAX_COUPONS: usize = 20;

/// Expected number of requests until every bin in `p` has been requested at
/// least once (coupon collector with unequal probabilities).
///
/// When `sum(p) < 1` the remaining mass acts as one more coupon type and the
/// result is the expected time to collect all `x + 1` types, an upper bound on
/// collecting the `x` bins alone. Any zero entry yields infinity.
pub fn expected_transform_requests(p: &[f64]) -> Result<f64> {
    if p.len() > MAX_COUPONS {
        return Err(Error::TooLarge(format!(
            "{} coupons; inclusion-exclusion is limited to {MAX_COUPONS}",
            p.len()
        )));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Validation(format!("invalid probability {v}")));
    }
    let total: f64 = p.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Validation(format!("probabilities sum to {total} > 1")));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    if p.contains(&0.0) {
        return Ok(f64::INFINITY);
    }
    let mut coupons = p.to_vec();
    let rest = 1.0 - total;
    if rest > 1e-12 {
        coupons.push(rest);
    }
    let n = coupons.len();
    let full = (1usize << n) - 1;
    // subset sums by peeling the lowest set bit
    let mut subset_sum = vec![0.0f64; 1 << n];
    let mut expected = 0.0;
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        subset_sum[mask] = subset_sum[mask & (mask - 1)] + coupons[low];
    }
    for (mask, &pj) in subset_sum.iter().enumerate().take(full) {
        let q = mask.count_ones() as usize;
        let sign = if (n - 1 - q).is_multiple_of(2) { 1.0 } else { -1.0 };
        expected += sign / (1.0 - pj);
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_catalog, Coord};

    fn spec(cols: usize, height: usize, fill: usize) -> GridSpec {
        GridSpec {
            rows: 1,
            cols,
            height,
            reserve_fraction: 0.0,
            fill_level: fill,
            cell_length: 0.65,
            cell_width: 0.45,
            bin_height: 0.33,
            workstations: vec![Coord::new(0, 0)],
            buffer_stack: None,
        }
    }

    pub(crate) fn example_two() -> (BinCatalog, LayerGroupAssignment) {
        let c = BinCatalog::from_sorted(vec![0.4, 0.3, 0.06, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04])
            .unwrap();
        let g = LayerGroupAssignment::from_catalog(&c, 3).unwrap();
        (c, g)
    }

    #[test]
    fn optimal_small_instance() {
        let c = BinCatalog::from_sorted(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let b = build_optimal_bgc(&spec(2, 2, 2), &c, 0).unwrap();
        assert_eq!(b.to_matrix(), vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn optimal_respects_empty_level_and_capacity() {
        let c = normalize_catalog(&[5.0, 4.0, 3.0, 2.0, 1.0, 1.0]).unwrap();
        let b = build_optimal_bgc(&spec(4, 3, 2), &c, 1).unwrap();
        assert_eq!(
            b.to_matrix(),
            vec![vec![0, 0, 0, 0], vec![1, 2, 3, 0], vec![4, 5, 6, 0]]
        );
        assert!(matches!(
            build_optimal_bgc(&spec(2, 3, 2), &c, 1),
            Err(Error::Capacity(_))
        ));
        let mut with_buffer = spec(3, 3, 2);
        with_buffer.buffer_stack = Some(2);
        assert!(matches!(
            build_optimal_bgc(&with_buffer, &c, 1),
            Err(Error::Capacity(_))
        ));
        assert!(build_optimal_bgc(&spec(4, 3, 2), &c, 2).is_err());
    }

    #[test]
    fn example_two_groups() {
        let (c, g) = example_two();
        let b = build_optimal_bgc(&spec(3, 3, 3), &c, 0).unwrap();
        assert_eq!(b.to_matrix()[0], vec![1, 2, 3]);
        let from_bgc = assign_layer_groups(&b, &c).unwrap();
        assert_eq!(from_bgc, g);
        assert_eq!(g.group_of(1), 1);
        assert_eq!(g.group_of(3), 1);
        assert_eq!(g.candidates(3), 1..=1);
        for bin in 4..=9 {
            assert_eq!(g.candidates(bin), 2..=3);
        }
        assert!(g.interchangeable(4, 9));
        assert!(!g.interchangeable(3, 4));
        assert_eq!(g.group_popularity(1), &[0.4, 0.3, 0.06]);
        assert_eq!(g.group_popularity(3), &[0.04]);
    }

    #[test]
    fn equality_classes() {
        let c = normalize_catalog(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        let g = LayerGroupAssignment::from_catalog(&c, 2).unwrap();
        assert!(g.equality_classes().iter().all(|c| c.len() == 1));

        let c = normalize_catalog(&[1.0; 6]).unwrap();
        let g = LayerGroupAssignment::from_catalog(&c, 2).unwrap();
        assert_eq!(g.equality_classes().len(), 1);
        assert!(is_layer_complete(&[6, 2, 5], &g));
    }

    #[test]
    fn example_two_layer_complete() {
        let (_, g) = example_two();
        assert!(is_layer_complete(&[5, 4, 1], &g));
        assert!(!is_layer_complete(&[6, 3, 2], &g));
        assert!(!is_layer_complete(&[9, 8, 7], &g));
        assert!(!is_layer_complete(&[4, 1], &g));
        let b = Bgc::from_stacks(3, vec![vec![5, 4, 1], vec![6, 3, 2], vec![9, 8, 7]]).unwrap();
        assert!(!is_equivalent_optimal(&b, &g));
        assert_eq!(distance_to_equivalent_optimal(&b, &g), 4);
    }

    #[test]
    fn equivalent_optimal_closure() {
        let c = normalize_catalog(&(1..=12).rev().map(f64::from).collect::<Vec<_>>()).unwrap();
        let s = spec(4, 4, 3);
        let b = build_optimal_bgc(&s, &c, 1).unwrap();
        let g = assign_layer_groups(&b, &c).unwrap();
        assert!(is_equivalent_optimal(&b, &g));
        assert_eq!(distance_to_equivalent_optimal(&b, &g), 0);

        // reorder inside stacks
        let mut stacks: Vec<Vec<BinId>> = (0..4).map(|m| b.stack(m).to_vec()).collect();
        stacks[0].reverse();
        stacks[2].rotate_left(1);
        let permuted = Bgc::from_stacks(4, stacks.clone()).unwrap();
        assert!(is_equivalent_optimal(&permuted, &g));

        // swap bin 1 (group 1, stack 0) with bin 6 (group 2, stack 1)
        let mut swapped = b.clone();
        swapped.swap_bins(1, 6);
        assert!(!is_equivalent_optimal(&swapped, &g));
        assert_eq!(distance_to_equivalent_optimal(&swapped, &g), 4);
    }

    #[test]
    fn quasi_equivalence() {
        let c = normalize_catalog(&(1..=12).rev().map(f64::from).collect::<Vec<_>>()).unwrap();
        let s = spec(4, 4, 3);
        let b = build_optimal_bgc(&s, &c, 1).unwrap();
        let g = assign_layer_groups(&b, &c).unwrap();
        assert_eq!(g.quasi_group_count(1.0), 3);
        assert_eq!(g.quasi_group_count(0.2), 1);
        assert_eq!(g.quasi_group_count(1e-9), 1);
        // swap two group-3 bins across stacks: still optimal-equivalent
        let mut x = b.clone();
        x.swap_bins(9, 10);
        assert!(is_quasi_equivalent_optimal(&x, &g, 0.2));
        // swap group 2 and group 3: group 1 still covered everywhere
        let mut y = b.clone();
        y.swap_bins(5, 10);
        assert!(!is_equivalent_optimal(&y, &g));
        assert!(is_quasi_equivalent_optimal(&y, &g, 0.2));
        assert!(!is_quasi_equivalent_optimal(&y, &g, 1.0));
        // swap group 1 and group 2
        let mut z = b.clone();
        z.swap_bins(1, 6);
        assert!(!is_quasi_equivalent_optimal(&z, &g, 0.2));
    }

    #[test]
    fn stack_distance_examples() {
        assert_eq!(stack_distance(&[1, 1, 1, 2, 5], &[1, 2, 3, 4, 5]), 4);
        assert_eq!(stack_distance(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(stack_distance(&[], &[1, 2]), 2);
    }

    #[test]
    fn empty_level_search() {
        let c = normalize_catalog(&[1.0; 6]).unwrap();
        let mut s = spec(6, 1, 1);
        let t = CostTable::build(1).unwrap();
        let r = optimal_empty_level(&s, &c, &t).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.candidates.len(), 1);

        s = spec(2, 2, 2);
        let c = normalize_catalog(&[1.0; 4]).unwrap();
        let t = CostTable::build(2).unwrap();
        let r = optimal_empty_level(&s, &c, &t).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.candidates.len(), 1);
    }

    #[test]
    fn empty_level_search_skips_infeasible() {
        let c = normalize_catalog(&[1.0; 8]).unwrap();
        let mut s = spec(3, 4, 4);
        s.reserve_fraction = 0.5;
        let t = CostTable::build(4).unwrap();
        let r = optimal_empty_level(&s, &c, &t).unwrap();
        assert_eq!(r.candidates.len(), 3);
        assert!(r.candidates[0].expected_cost.is_some());
        // h_e = 2 needs four stacks of two
        assert_eq!(r.candidates[2].expected_cost, None);
    }

    #[test]
    fn coupon_collector_closed_forms() {
        assert!((expected_transform_requests(&[0.5, 0.5]).unwrap() - 3.0).abs() < 1e-12);
        assert!((expected_transform_requests(&[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(expected_transform_requests(&[]).unwrap(), 0.0);
        // n equal coupons: n * H_n
        let q = [0.25; 4];
        let h4 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
        assert!((expected_transform_requests(&q).unwrap() - 4.0 * h4).abs() < 1e-9);
    }

    #[test]
    fn coupon_collector_edge_cases() {
        assert_eq!(expected_transform_requests(&[0.3, 0.0]).unwrap(), f64::INFINITY);
        assert!(matches!(
            expected_transform_requests(&[0.1; 21]),
            Err(Error::TooLarge(_))
        ));
        assert!(matches!(
            expected_transform_requests(&[-0.1, 0.2]),
            Err(Error::Validation(_))
        ));
        assert!(expected_transform_requests(&[0.7, 0.7]).is_err());
        assert!(expected_transform_requests(&[0.04; 20]).unwrap().is_finite());
    }
}
