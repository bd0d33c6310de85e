//! Storage-stack selection for returning bins and the dig placement rule.
//!
//! The layer complete policy decides on stack *contents*, which are sets: a
//! stack's order only matters for picking the uppermost swap bin. Callers pass
//! the contents as bottom-to-top vectors together with an availability test,
//! so the same code serves the event-driven simulator (where some stacks are
//! locked by robots in flight) and the sequential request model below.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinId, Coord, GridSpec, StackId};
use crate::solver::{sets_distance, LayerGroupAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    LayerComplete,
    DelayedReshuffle,
    ImmediateReshuffle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::LayerComplete,
        PolicyKind::DelayedReshuffle,
        PolicyKind::ImmediateReshuffle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::LayerComplete => "layer_complete",
            PolicyKind::DelayedReshuffle => "delayed_reshuffle",
            PolicyKind::ImmediateReshuffle => "immediate_reshuffle",
        }
    }

    /// Checks the buffer-stack requirement of the policy. The reshuffling
    /// baselines ignore any buffer stack.
    pub fn check_buffer(self, buffer_stack: Option<StackId>) -> Result<()> {
        if self == PolicyKind::LayerComplete && buffer_stack.is_none() {
            return Err(Error::Validation(
                "layer_complete requires a buffer stack".into(),
            ));
        }
        Ok(())
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Validation(format!("unknown policy {name:?}")))
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What happens to dug-up bins once the target has left its stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestoreBehavior {
    /// Every dug-up bin returns to the target stack in reverse dig order.
    All,
    /// Only bins parked on temporary cells return; the rest stay where they
    /// were placed.
    TemporaryOnly,
}

pub fn reshuffle_mode(kind: PolicyKind) -> RestoreBehavior {
    match kind {
        PolicyKind::DelayedReshuffle => RestoreBehavior::TemporaryOnly,
        PolicyKind::ImmediateReshuffle | PolicyKind::LayerComplete => RestoreBehavior::All,
    }
}

/// Default period between buffer-stack checks, simulated seconds.
pub const DEFAULT_CHECK_PERIOD: f64 = 300.0;
/// Default popular fraction for quasi-equivalence.
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpState {
    pub groups: LayerGroupAssignment,
    pub buffer_stack: StackId,
    pub check_period: f64,
    pub last_check: f64,
}

impl LcpState {
    pub fn new(groups: LayerGroupAssignment, buffer_stack: StackId) -> Result<Self> {
        if buffer_stack < groups.occupied_stacks() {
            return Err(Error::Validation(format!(
                "buffer stack {buffer_stack} is one of the occupied stacks"
            )));
        }
        Ok(Self {
            groups,
            buffer_stack,
            check_period: DEFAULT_CHECK_PERIOD,
            last_check: 0.0,
        })
    }

    fn is_occupied(&self, stack: StackId) -> bool {
        stack < self.groups.occupied_stacks()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    BaselineRandom,
}

impl DecisionKind {
    /// Change of the distance to equivalent optimality caused by one request
    /// resolved with this case, for a target taken from an occupied stack.
    pub fn expected_delta(self) -> Option<i64> {
        match self {
            DecisionKind::Case1 => Some(0),
            DecisionKind::Case2 => Some(-2),
            DecisionKind::Case3 => Some(-4),
            DecisionKind::Case4 => Some(-1),
            DecisionKind::Case5 => Some(0),
            DecisionKind::BaselineRandom => None,
        }
    }

    /// As [`expected_delta`](Self::expected_delta) for a target taken from the
    /// buffer stack, whose removal does not count.
    pub fn expected_delta_from_buffer(self) -> Option<i64> {
        match self {
            DecisionKind::Case2 => Some(-1),
            DecisionKind::Case3 => Some(-2),
            DecisionKind::Case4 => Some(0),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            DecisionKind::Case1 => 1,
            DecisionKind::Case2 => 2,
            DecisionKind::Case3 => 3,
            DecisionKind::Case4 => 4,
            DecisionKind::Case5 => 5,
            DecisionKind::BaselineRandom => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub source: StackId,
    pub bin: BinId,
    /// Always the target stack.
    pub destination: StackId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageDecision {
    pub kind: DecisionKind,
    pub destination: StackId,
    pub swap: Option<Swap>,
}

impl StorageDecision {
    fn to(kind: DecisionKind, destination: StackId) -> Self {
        Self {
            kind,
            destination,
            swap: None,
        }
    }

    /// Stacks whose contents change when the decision executes.
    pub fn touched_stacks(&self) -> Vec<StackId> {
        let mut v = vec![self.destination];
        if let Some(s) = self.swap {
            v.push(s.destination);
        }
        v
    }
}

/// Stack contents as seen by a storage decision.
pub struct StorageContext<'a> {
    /// Bottom-to-top contents of every stack, the returning bin excluded.
    pub stacks: &'a [Vec<BinId>],
    pub height: usize,
    /// Whether a stack may be touched right now.
    pub available: &'a dyn Fn(StackId) -> bool,
}

impl StorageContext<'_> {
    fn has_room(&self, stack: StackId) -> bool {
        self.stacks[stack].len() < self.height
    }

    fn free(&self, stack: StackId) -> usize {
        self.height.saturating_sub(self.stacks[stack].len())
    }
}

fn with_bin(stack: &[BinId], bin: BinId) -> Vec<BinId> {
    let mut v = stack.to_vec();
    v.push(bin);
    v
}

/// True iff adding `bin` to `stack` covers one more layer group.
fn inserts_absent_group(groups: &LayerGroupAssignment, stack: &[BinId], bin: BinId) -> bool {
    let h = groups.fill_level();
    groups.coverage(&with_bin(stack, bin), h) > groups.coverage(stack, h)
}

/// Chooses the storage stack for `target_bin`, which was retrieved from
/// `target_stack`. The five cases are tried in order; among qualifying stacks
/// the lowest ID wins.
///
/// Case 1 and Case 4 name a fixed stack and are returned even when that stack
/// is unavailable; callers must wait for it.
pub fn lcp_select_storage(
    state: &LcpState,
    ctx: &StorageContext<'_>,
    target_bin: BinId,
    target_stack: StackId,
) -> Result<StorageDecision> {
    let groups = &state.groups;
    let occupied = groups.occupied_stacks();
    let from_occupied = state.is_occupied(target_stack);
    let target = &ctx.stacks[target_stack];

    if from_occupied && inserts_absent_group(groups, target, target_bin) {
        return Ok(StorageDecision::to(DecisionKind::Case1, target_stack));
    }

    let others = || (0..occupied).filter(move |&m| m != target_stack && (ctx.available)(m));

    if let Some(m) = others().find(|&m| {
        ctx.has_room(m) && inserts_absent_group(groups, &ctx.stacks[m], target_bin)
    }) {
        return Ok(StorageDecision::to(DecisionKind::Case2, m));
    }

    if (ctx.available)(target_stack) {
        for m in others() {
            if let Some(bin) = swap_bin(groups, ctx, m, target, target_bin) {
                return Ok(StorageDecision {
                    kind: DecisionKind::Case3,
                    destination: m,
                    swap: Some(Swap {
                        source: m,
                        bin,
                        destination: target_stack,
                    }),
                });
            }
        }
    }

    if ctx.has_room(state.buffer_stack) {
        return Ok(StorageDecision::to(DecisionKind::Case4, state.buffer_stack));
    }

    (0..occupied)
        .filter(|&m| (ctx.available)(m) && ctx.has_room(m))
        .max_by(|&a, &b| ctx.free(a).cmp(&ctx.free(b)).then(b.cmp(&a)))
        .map(|m| StorageDecision::to(DecisionKind::Case5, m))
        .ok_or_else(|| Error::Capacity("no occupied stack has an empty cell".into()))
}

/// The swap bin of Case 3 for candidate stack `m`, if any: a bin whose move
/// to the target stack covers a group there, while `target_bin` takes its
/// place in `m` and covers a group there. Smallest own group first, then the
/// uppermost.
fn swap_bin(
    groups: &LayerGroupAssignment,
    ctx: &StorageContext<'_>,
    m: StackId,
    target: &[BinId],
    target_bin: BinId,
) -> Option<BinId> {
    let h = groups.fill_level();
    let stack = &ctx.stacks[m];
    if !inserts_absent_group(groups, stack, target_bin) {
        return None;
    }
    let base = groups.coverage(stack, h);
    let target_base = groups.coverage(target, h);
    let mut best: Option<(usize, usize, BinId)> = None;
    for (pos, &c) in stack.iter().enumerate() {
        let mut rest: Vec<BinId> = stack.iter().copied().filter(|&x| x != c).collect();
        rest.push(target_bin);
        if groups.coverage(&rest, h) != base + 1 {
            continue;
        }
        if groups.coverage(&with_bin(target, c), h) != target_base + 1 {
            continue;
        }
        let key = (groups.group_of(c), usize::MAX - pos, c);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    best.map(|(_, _, c)| c)
}

/// A bin to carry from the buffer stack to an occupied stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferMove {
    pub bin: BinId,
    pub destination: StackId,
}

/// Periodic buffer check: walking the buffer top-down, each bin moves to the
/// lowest-ID occupied stack with room that lacks its group. The walk stops at
/// the first bin with no such stack, since the bins beneath it cannot be
/// reached without digging.
pub fn buffer_check(state: &LcpState, ctx: &StorageContext<'_>) -> Vec<BufferMove> {
    let groups = &state.groups;
    let mut stacks: Vec<Vec<BinId>> = ctx.stacks.to_vec();
    let mut moves = Vec::new();
    while let Some(&bin) = stacks[state.buffer_stack].last() {
        let dest = (0..groups.occupied_stacks()).find(|&m| {
            (ctx.available)(m)
                && stacks[m].len() < ctx.height
                && inserts_absent_group(groups, &stacks[m], bin)
        });
        let Some(destination) = dest else { break };
        stacks[state.buffer_stack].pop();
        stacks[destination].push(bin);
        moves.push(BufferMove { bin, destination });
    }
    moves
}

/// Uniformly random occupied stack with an empty cell, among available ones.
pub fn baseline_select_storage<R: Rng + ?Sized>(
    ctx: &StorageContext<'_>,
    occupied: usize,
    rng: &mut R,
) -> Option<StorageDecision> {
    let eligible: Vec<StackId> = (0..occupied)
        .filter(|&m| (ctx.available)(m) && ctx.has_room(m))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let m = eligible[rng.gen_range(0..eligible.len())];
    Some(StorageDecision::to(DecisionKind::BaselineRandom, m))
}

/// Destinations for the bins dug out above a target, in dig order (top-down).
///
/// Stacks are filled nearest-first by Manhattan distance from the target,
/// ties by lower stack ID, each taking as many bins as `free_slots` reports
/// (empty cells plus the temporary cell) before the next stack is used.
pub fn dig_placement_plan(
    spec: &GridSpec,
    target_stack: StackId,
    dug_bins: &[BinId],
    eligible: impl Fn(StackId) -> bool,
    free_slots: impl Fn(StackId) -> usize,
) -> Result<Vec<(BinId, StackId)>> {
    if dug_bins.is_empty() {
        return Ok(Vec::new());
    }
    let origin: Coord = spec.coord(target_stack);
    let mut near: Vec<StackId> = (0..spec.stack_count())
        .filter(|&m| m != target_stack && eligible(m))
        .collect();
    near.sort_by_key(|&m| (spec.coord(m).manhattan(origin), m));
    let mut plan = Vec::with_capacity(dug_bins.len());
    let mut bins = dug_bins.iter();
    'stacks: for m in near {
        for _ in 0..free_slots(m) {
            match bins.next() {
                Some(&b) => plan.push((b, m)),
                None => break 'stacks,
            }
        }
    }
    if plan.len() < dug_bins.len() {
        return Err(Error::Capacity(format!(
            "room for {} of {} dug-up bins",
            plan.len(),
            dug_bins.len()
        )));
    }
    Ok(plan)
}

/// Result of serving one request in [`LcpModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServedRequest {
    pub bin: BinId,
    pub origin: StackId,
    pub decision: StorageDecision,
    /// Distance change from retrieval through storage, buffer check excluded.
    pub delta: i64,
    pub buffer_moves: Vec<BufferMove>,
    /// Distance change of the buffer check.
    pub buffer_delta: i64,
}

/// Request-by-request model of the layer complete policy with instantaneous
/// robots: each request removes the bin (restoring any dug-up bins in their
/// original order), stores it per the policy and optionally runs the buffer
/// check.
#[derive(Debug, Clone)]
pub struct LcpModel {
    pub state: LcpState,
    stacks: Vec<Vec<BinId>>,
    height: usize,
    check_every_request: bool,
}

impl LcpModel {
    pub fn new(
        state: LcpState,
        stacks: Vec<Vec<BinId>>,
        height: usize,
        check_every_request: bool,
    ) -> Self {
        Self {
            state,
            stacks,
            height,
            check_every_request,
        }
    }

    pub fn stacks(&self) -> &[Vec<BinId>] {
        &self.stacks
    }

    pub fn distance(&self) -> usize {
        sets_distance(&self.stacks, &self.state.groups)
    }

    pub fn locate(&self, bin: BinId) -> Option<StackId> {
        self.stacks.iter().position(|s| s.contains(&bin))
    }

    pub fn serve(&mut self, bin: BinId) -> Result<ServedRequest> {
        let origin = self
            .locate(bin)
            .ok_or_else(|| Error::Validation(format!("bin {bin} is not in the grid")))?;
        let before = self.distance() as i64;
        self.stacks[origin].retain(|&b| b != bin);
        let all = |_: StackId| true;
        let ctx = StorageContext {
            stacks: &self.stacks,
            height: self.height,
            available: &all,
        };
        let decision = lcp_select_storage(&self.state, &ctx, bin, origin)?;
        if let Some(swap) = decision.swap {
            let s = &mut self.stacks[swap.source];
            let pos = s.iter().position(|&b| b == swap.bin).expect("swap bin present");
            s.remove(pos);
            self.stacks[swap.destination].push(swap.bin);
        }
        self.stacks[decision.destination].push(bin);
        let after = self.distance() as i64;
        let buffer_moves = if self.check_every_request {
            self.run_buffer_check()
        } else {
            Vec::new()
        };
        let buffer_delta = self.distance() as i64 - after;
        Ok(ServedRequest {
            bin,
            origin,
            decision,
            delta: after - before,
            buffer_moves,
            buffer_delta,
        })
    }

    pub fn run_buffer_check(&mut self) -> Vec<BufferMove> {
        let all = |_: StackId| true;
        let ctx = StorageContext {
            stacks: &self.stacks,
            height: self.height,
            available: &all,
        };
        let moves = buffer_check(&self.state, &ctx);
        for mv in &moves {
            let top = self.stacks[self.state.buffer_stack].pop();
            debug_assert_eq!(top, Some(mv.bin));
            self.stacks[mv.destination].push(mv.bin);
        }
        moves
    }
}
