//! Deterministic discrete-event simulation of the request workflow.
//!
//! Time is kept in integer microseconds. A job is dispatched only when every
//! stack it touches is unlocked; it locks those stacks, its physical effects
//! are applied at dispatch and the locks are released when the work is done.
//! Besides the physical grid the engine keeps each stack's *home* contents:
//! the bins the stack will hold once all committed work has finished, bins
//! away at a workstation still counted at their origin. Storage decisions and
//! distance snapshots use the home contents.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{micros, pick_time, place_time, travel_time};
use crate::model::{BinId, Bgc, Coord, StackId};
use crate::policy::{
    baseline_select_storage, buffer_check, dig_placement_plan, lcp_select_storage, reshuffle_mode,
    BufferMove, LcpState, PolicyKind, RestoreBehavior, StorageContext,
    StorageDecision,
};
use crate::scenario::{generate_requests, randomize_from_optimal, Horizon, Request, Scenario};
use crate::solver::{build_optimal_bgc, sets_distance, sets_equivalent_optimal, sets_quasi_equivalent_optimal, LayerGroupAssignment};

const STREAM_REQUESTS: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_STORAGE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Delivery1,
    Digging,
    Delivery2,
    Release,
    Restore,
    /// Case 3 pre-work: moving the swap bin into the target stack.
    Swap,
    Delivery3,
    Insert,
    BufferCheck,
}

impl TaskKind {
    pub fn priority(self) -> PriorityClass {
        match self {
            TaskKind::Delivery1 | TaskKind::Digging | TaskKind::Delivery2 | TaskKind::Release => {
                PriorityClass::Retrieval
            }
            TaskKind::Restore | TaskKind::BufferCheck => PriorityClass::Reshuffle,
            TaskKind::Swap | TaskKind::Delivery3 | TaskKind::Insert => PriorityClass::Return,
        }
    }
}

/// Dispatch order: lower is served first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityClass {
    Return,
    Reshuffle,
    Retrieval,
}

/// One completed phase of robot work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub request: Option<u64>,
    pub robot: usize,
    pub kind: TaskKind,
    pub start: u64,
    pub end: u64,
    /// Horizontal travel inside the phase, microseconds.
    pub delivery: u64,
    /// Gripper motion and handling inside the phase, microseconds.
    pub gripper: u64,
}

/// Timestamps of one request, microseconds. Requests served without robot
/// work (the bin was already bound for or at a workstation) carry the arrival
/// time in every field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: u64,
    pub bin: BinId,
    pub workstation: usize,
    pub merged: bool,
    pub stack: Option<StackId>,
    /// Layer of the target, counted from the top (0 for merged requests).
    pub depth: usize,
    pub bins_above: usize,
    pub robot: Option<usize>,
    pub arrival: u64,
    pub dispatch: u64,
    pub at_stack: u64,
    pub dug: u64,
    pub at_workstation: u64,
    pub released: u64,
}

impl RequestRecord {
    pub fn waiting(&self) -> u64 {
        self.dispatch - self.arrival
    }
    pub fn delivery1(&self) -> u64 {
        self.at_stack - self.dispatch
    }
    pub fn digging(&self) -> u64 {
        self.dug - self.at_stack
    }
    pub fn delivery2(&self) -> u64 {
        self.at_workstation - self.dug
    }
    pub fn retrieval_time(&self) -> u64 {
        self.at_workstation - self.arrival
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Request that brought the bin out.
    pub request: u64,
    pub time: u64,
    pub bin: BinId,
    pub origin: StackId,
    pub from_buffer: bool,
    pub decision: StorageDecision,
    /// Distance change caused by the decision.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferCheckRecord {
    pub time: u64,
    pub moves: Vec<BufferMove>,
    pub delta: i64,
}

/// Configuration status after the `k`-th insert (k = 0 is the start).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: u64,
    pub time: u64,
    pub distance: usize,
    pub equivalent: bool,
    pub quasi: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSnapshot {
    pub k: u64,
    pub matrix: Vec<Vec<BinId>>,
}

/// Cumulative working time of one robot, microseconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotStats {
    pub delivery: u64,
    pub gripper: u64,
}

impl RobotStats {
    pub fn overall(&self) -> u64 {
        self.delivery + self.gripper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub policy: PolicyKind,
    pub seed: u64,
    pub randomization: u32,
    pub empty_level: usize,
    pub fill_level: usize,
    pub epsilon: f64,
    pub requests: Vec<RequestRecord>,
    pub phases: Vec<PhaseRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub buffer_checks: Vec<BufferCheckRecord>,
    pub snapshots: Vec<Snapshot>,
    pub matrices: Vec<MatrixSnapshot>,
    pub robots: Vec<RobotStats>,
    pub end_time: u64,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine<'a> {
    Request(&'a RequestRecord),
    Phase(&'a PhaseRecord),
    Decision(&'a DecisionRecord),
    BufferCheck(&'a BufferCheckRecord),
    Snapshot(&'a Snapshot),
    Matrix(&'a MatrixSnapshot),
}

impl EventLog {
    /// First insert count at which the configuration is equivalent optimal.
    pub fn lambda(&self) -> Option<u64> {
        self.snapshots.iter().find(|s| s.equivalent).map(|s| s.k)
    }

    /// As [`lambda`](Self::lambda) for quasi-equivalence.
    pub fn lambda_quasi(&self) -> Option<u64> {
        self.snapshots.iter().find(|s| s.quasi).map(|s| s.k)
    }

    /// Newline-delimited JSON: phases in completion order, then requests,
    /// decisions, buffer checks, snapshots and matrices.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let mut push = |line: LogLine<'_>| {
            out.push_str(&serde_json::to_string(&line).expect("log records serialize"));
            out.push('\n');
        };
        self.phases.iter().for_each(|r| push(LogLine::Phase(r)));
        self.requests.iter().for_each(|r| push(LogLine::Request(r)));
        self.decisions.iter().for_each(|r| push(LogLine::Decision(r)));
        self.buffer_checks.iter().for_each(|r| push(LogLine::BufferCheck(r)));
        self.snapshots.iter().for_each(|r| push(LogLine::Snapshot(r)));
        self.matrices.iter().for_each(|r| push(LogLine::Matrix(r)));
        out
    }

    /// Checks the per-record invariants. Returns the first violation.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        for r in &self.requests {
            let t = [r.arrival, r.dispatch, r.at_stack, r.dug, r.at_workstation, r.released];
            if t.windows(2).any(|w| w[0] > w[1]) {
                return bad(format!("request {} timestamps decrease", r.id));
            }
        }
        for p in &self.phases {
            if p.end < p.start || p.end - p.start != p.delivery + p.gripper {
                return bad(format!("phase {:?} of robot {} is inconsistent", p.kind, p.robot));
            }
        }
        let total: u64 = self.phases.iter().map(|p| p.end - p.start).sum();
        let robots: u64 = self.robots.iter().map(RobotStats::overall).sum();
        if total != robots {
            return bad(format!("phase total {total} differs from robot total {robots}"));
        }
        Ok(())
    }
}

/// The initial configuration of a scenario and the layer groups it is
/// judged against.
pub fn initial_state(scenario: &Scenario) -> Result<(Bgc, LayerGroupAssignment)> {
    let spec = &scenario.spec;
    let optimal = build_optimal_bgc(spec, &scenario.catalog, spec.empty_level())?;
    let groups = LayerGroupAssignment::from_catalog(
        &scenario.catalog,
        spec.occupied_stacks(scenario.catalog.len()),
    )?;
    let bgc = match &scenario.initial {
        Some(b) => {
            if b.stack_count() != spec.stack_count() || b.height() != spec.height {
                return Err(Error::Validation("initial configuration has the wrong shape".into()));
            }
            let mut bins: Vec<BinId> = b.bins().collect();
            bins.sort_unstable();
            if bins != scenario.catalog.bin_ids().collect::<Vec<_>>() {
                return Err(Error::Validation(
                    "initial configuration must hold every catalog bin once".into(),
                ));
            }
            b.clone()
        }
        None => {
            let mut rng = stream(scenario.seed, STREAM_INITIAL);
            randomize_from_optimal(&optimal, scenario.randomization, &mut rng)?
        }
    };
    Ok((bgc, groups))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs a scenario to completion: every request arriving within the horizon
/// is served and its bin stored again.
pub fn run(scenario: &Scenario) -> Result<EventLog> {
    run_with(scenario, false)
}

/// As [`run`], checking bin conservation after every event when `audit` is set.
pub fn run_with(scenario: &Scenario, audit: bool) -> Result<EventLog> {
    scenario.validate()?;
    let (bgc, groups) = initial_state(scenario)?;
    let requests = generate_requests(
        &scenario.catalog,
        scenario.request_rate,
        scenario.horizon,
        &mut stream(scenario.seed, STREAM_REQUESTS),
    )?;
    let mut engine = Engine::new(scenario, bgc, groups, requests, audit)?;
    engine.run()?;
    Ok(engine.log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    JobDone(usize),
    DigDone(u64),
    ProcessingDone(usize),
    BufferTick,
    Arrival(usize),
}

impl Event {
    fn rank(self) -> (u8, u64) {
        match self {
            Event::JobDone(r) => (0, r as u64),
            Event::DigDone(q) => (1, q),
            Event::ProcessingDone(v) => (2, v as u64),
            Event::BufferTick => (3, 0),
            Event::Arrival(q) => (4, q as u64),
        }
    }
}

struct Visit {
    bin: BinId,
    request: u64,
    workstation: usize,
    extras: u32,
    processing_end: Option<u64>,
    ready: bool,
}

struct RestoreJob {
    request: u64,
    target: StackId,
    /// Dug-up bins to bring back and where they sit, in dig order.
    bins: Vec<(BinId, StackId)>,
    unlock: Vec<StackId>,
}

enum Reshuffle {
    Restore(RestoreJob),
    BufferCheck,
}

enum Completion {
    Retrieval { visit: usize },
    Return,
    Other,
}

struct Busy {
    completion: Completion,
    unlock: Vec<StackId>,
    end_pos: Coord,
}

struct Robot {
    pos: Coord,
    busy: Option<Busy>,
}

struct Engine<'a> {
    sc: &'a Scenario,
    groups: LayerGroupAssignment,
    lcp: Option<LcpState>,
    occupied: usize,
    requests: Vec<Request>,
    now: u64,
    seq: u64,
    events: BinaryHeap<Reverse<(u64, (u8, u64), u64, Event)>>,
    bgc: Bgc,
    home: Vec<Vec<BinId>>,
    locked: Vec<bool>,
    off_grid: BTreeSet<BinId>,
    robots: Vec<Robot>,
    free: VecDeque<usize>,
    visits: Vec<Visit>,
    visit_of: Vec<Option<usize>>,
    retrievals: Vec<usize>,
    returns: VecDeque<usize>,
    reshuffles: VecDeque<Reshuffle>,
    check_pending: bool,
    dig_done: Vec<Option<(Option<RestoreJob>, Vec<StackId>)>>,
    storage_rng: ChaCha8Rng,
    horizon_end: u64,
    inserts: u64,
    audit: bool,
    log: EventLog,
}

impl<'a> Engine<'a> {
    fn new(
        sc: &'a Scenario,
        bgc: Bgc,
        groups: LayerGroupAssignment,
        requests: Vec<Request>,
        audit: bool,
    ) -> Result<Self> {
        let spec = &sc.spec;
        let occupied = groups.occupied_stacks();
        let lcp = match sc.policy {
            PolicyKind::LayerComplete => {
                let buffer = spec.buffer_stack.expect("validated");
                let mut s = LcpState::new(groups.clone(), buffer)?;
                s.check_period = sc.check_period;
                Some(s)
            }
            _ => None,
        };
        let home: Vec<Vec<BinId>> = (0..bgc.stack_count()).map(|m| bgc.stack(m).to_vec()).collect();
        let start = spec.workstations[0];
        let horizon_end = match sc.horizon {
            Horizon::Seconds(s) => micros(s),
            Horizon::Requests(_) => requests.last().map_or(0, |r| r.time),
        };
        let n = sc.catalog.len();
        let log = EventLog {
            policy: sc.policy,
            seed: sc.seed,
            randomization: sc.randomization,
            empty_level: spec.empty_level(),
            fill_level: spec.fill_level,
            epsilon: sc.epsilon,
            requests: Vec::with_capacity(requests.len()),
            phases: Vec::new(),
            decisions: Vec::new(),
            buffer_checks: Vec::new(),
            snapshots: Vec::new(),
            matrices: Vec::new(),
            robots: vec![RobotStats::default(); sc.robots],
            end_time: 0,
        };
        let mut e = Self {
            sc,
            groups,
            lcp,
            occupied,
            now: 0,
            seq: 0,
            events: BinaryHeap::new(),
            locked: vec![false; bgc.stack_count()],
            bgc,
            home,
            off_grid: BTreeSet::new(),
            robots: (0..sc.robots)
                .map(|_| Robot {
                    pos: start,
                    busy: None,
                })
                .collect(),
            free: (0..sc.robots).collect(),
            visits: Vec::new(),
            visit_of: vec![None; n + 1],
            retrievals: Vec::new(),
            returns: VecDeque::new(),
            reshuffles: VecDeque::new(),
            check_pending: false,
            dig_done: Vec::new(),
            storage_rng: stream(sc.seed, STREAM_STORAGE),
            horizon_end,
            inserts: 0,
            audit,
            log,
            requests,
        };
        e.dig_done = (0..e.requests.len()).map(|_| None).collect();
        for i in 0..e.requests.len() {
            let t = e.requests[i].time;
            e.schedule(t, Event::Arrival(i));
        }
        if e.lcp.is_some() {
            let period = micros(sc.check_period);
            if period <= e.horizon_end {
                e.schedule(period, Event::BufferTick);
            }
        }
        e.snapshot();
        Ok(e)
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.events.push(Reverse((time, event.rank(), self.seq, event)));
    }

    fn run(&mut self) -> Result<()> {
        while let Some(Reverse((t, _, _, _))) = self.events.peek() {
            self.now = *t;
            while let Some(Reverse((t, _, _, ev))) = self.events.peek().copied() {
                if t != self.now {
                    break;
                }
                self.events.pop();
                self.handle(ev)?;
            }
            self.dispatch()?;
            if self.audit {
                self.audit_bins()?;
            }
            if self.events.is_empty() && self.has_pending() {
                return Err(Error::Deadlock(self.dump()));
            }
        }
        self.log.end_time = self.now;
        self.log
            .phases
            .sort_by_key(|p| (p.end, p.start, p.robot, p.kind));
        Ok(())
    }

    fn has_pending(&self) -> bool {
        !self.retrievals.is_empty() || !self.returns.is_empty() || !self.reshuffles.is_empty()
    }

    fn dump(&self) -> String {
        let locked: Vec<StackId> = (0..self.locked.len()).filter(|&m| self.locked[m]).collect();
        format!(
            "t={}us: {} retrievals, {} returns, {} reshuffles pending; {} of {} robots free; locked stacks {:?}; home sizes {:?}",
            self.now,
            self.retrievals.len(),
            self.returns.len(),
            self.reshuffles.len(),
            self.free.len(),
            self.robots.len(),
            locked,
            self.home.iter().map(Vec::len).collect::<Vec<_>>()
        )
    }

    fn audit_bins(&self) -> Result<()> {
        let mut seen = vec![false; self.sc.catalog.len() + 1];
        for b in self.bgc.bins().chain(self.off_grid.iter().copied()) {
            if std::mem::replace(&mut seen[b as usize], true) {
                return Err(Error::Domain(format!("bin {b} appears twice at t={}", self.now)));
            }
        }
        if let Some(b) = seen.iter().skip(1).position(|s| !s) {
            return Err(Error::Domain(format!("bin {} is missing at t={}", b + 1, self.now)));
        }
        let mut homed: Vec<BinId> = self.home.iter().flatten().copied().collect();
        homed.sort_unstable();
        if homed.len() != self.sc.catalog.len() || homed.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("home contents inconsistent at t={}", self.now)));
        }
        Ok(())
    }

    fn handle(&mut self, ev: Event) -> Result<()> {
        match ev {
            Event::Arrival(i) => self.arrive(i),
            Event::DigDone(q) => {
                let (restore, unlock) = self.dig_done[q as usize].take().expect("dig scheduled");
                self.unlock(&unlock);
                if let Some(job) = restore {
                    self.reshuffles.push_back(Reshuffle::Restore(job));
                }
            }
            Event::JobDone(r) => self.job_done(r)?,
            Event::ProcessingDone(v) => {
                let visit = &mut self.visits[v];
                if visit.processing_end == Some(self.now) && !visit.ready {
                    visit.ready = true;
                    self.returns.push_back(v);
                }
            }
            Event::BufferTick => {
                if !self.check_pending {
                    self.check_pending = true;
                    self.reshuffles.push_back(Reshuffle::BufferCheck);
                }
                let next = self.now + micros(self.sc.check_period);
                if next <= self.horizon_end {
                    self.schedule(next, Event::BufferTick);
                }
            }
        }
        Ok(())
    }

    fn arrive(&mut self, i: usize) {
        let req = self.requests[i];
        let ws_count = self.sc.spec.workstations.len();
        if let Some(v) = self.visit_of[req.bin as usize] {
            let proc = micros(self.sc.processing_time);
            let visit = &mut self.visits[v];
            match visit.processing_end {
                Some(end) if !visit.ready => {
                    let end = end.max(self.now) + proc;
                    visit.processing_end = Some(end);
                    self.schedule(end, Event::ProcessingDone(v));
                }
                Some(_) => {
                    // waiting for a storage stack: hold the bin for another round
                    visit.ready = false;
                    self.returns.retain(|&x| x != v);
                    let end = self.now + proc;
                    self.visits[v].processing_end = Some(end);
                    self.schedule(end, Event::ProcessingDone(v));
                }
                None => visit.extras += 1,
            }
            let ws = self.visits[v].workstation;
            self.log.requests.push(RequestRecord {
                id: req.id,
                bin: req.bin,
                workstation: ws,
                merged: true,
                stack: None,
                depth: 0,
                bins_above: 0,
                robot: None,
                arrival: req.time,
                dispatch: req.time,
                at_stack: req.time,
                dug: req.time,
                at_workstation: req.time,
                released: req.time,
            });
            return;
        }
        let v = self.visits.len();
        self.visits.push(Visit {
            bin: req.bin,
            request: req.id,
            workstation: req.id as usize % ws_count,
            extras: 0,
            processing_end: None,
            ready: false,
        });
        self.visit_of[req.bin as usize] = Some(v);
        self.retrievals.push(v);
        self.log.requests.push(RequestRecord {
            id: req.id,
            bin: req.bin,
            workstation: req.id as usize % ws_count,
            merged: false,
            stack: None,
            depth: 0,
            bins_above: 0,
            robot: None,
            arrival: req.time,
            dispatch: req.time,
            at_stack: req.time,
            dug: req.time,
            at_workstation: req.time,
            released: req.time,
        });
    }

    fn job_done(&mut self, r: usize) -> Result<()> {
        let busy = self.robots[r].busy.take().expect("robot was busy");
        self.robots[r].pos = busy.end_pos;
        self.unlock(&busy.unlock);
        self.free.push_back(r);
        match busy.completion {
            Completion::Retrieval { visit } => {
                let proc = micros(self.sc.processing_time);
                let v = &mut self.visits[visit];
                let end = self.now + proc * (1 + v.extras as u64);
                v.processing_end = Some(end);
                self.schedule(end, Event::ProcessingDone(visit));
            }
            Completion::Return => {
                self.inserts += 1;
                self.snapshot();
            }
            Completion::Other => {}
        }
        Ok(())
    }

    fn snapshot(&mut self) {
        let distance = sets_distance(&self.home, &self.groups);
        self.log.snapshots.push(Snapshot {
            k: self.inserts,
            time: self.now,
            distance,
            equivalent: sets_equivalent_optimal(&self.home, &self.groups),
            quasi: sets_quasi_equivalent_optimal(&self.home, &self.groups, self.sc.epsilon),
        });
        let cadence = self.sc.snapshot_cadence as u64;
        if cadence > 0 && self.inserts.is_multiple_of(cadence) {
            self.log.matrices.push(MatrixSnapshot {
                k: self.inserts,
                matrix: self.bgc.to_matrix(),
            });
        }
    }

    fn lock(&mut self, stacks: &[StackId]) {
        for &m in stacks {
            debug_assert!(!self.locked[m], "stack {m} locked twice");
            self.locked[m] = true;
        }
    }

    fn unlock(&mut self, stacks: &[StackId]) {
        for &m in stacks {
            self.locked[m] = false;
        }
    }

    fn dispatch(&mut self) -> Result<()> {
        while !self.free.is_empty() {
            if self.try_return()? || self.try_reshuffle()? || self.try_retrieval()? {
                continue;
            }
            break;
        }
        Ok(())
    }

    // ---- timing helpers ----

    fn coord(&self, m: StackId) -> Coord {
        self.sc.spec.coord(m)
    }

    fn travel(&self, a: Coord, b: Coord) -> u64 {
        micros(travel_time(a, b, &self.sc.spec, &self.sc.kinematics))
    }

    fn pick(&self, layer: usize) -> u64 {
        micros(pick_time(layer, self.sc.spec.bin_height, &self.sc.kinematics))
    }

    fn place(&self, layer: usize) -> u64 {
        micros(place_time(layer, self.sc.spec.bin_height, &self.sc.kinematics))
    }

    fn take_top(&mut self, m: StackId, expect: Option<BinId>) -> Result<(BinId, usize)> {
        let (b, l) = self
            .bgc
            .take_top(m)
            .ok_or_else(|| Error::Domain(format!("stack {m} is empty at t={}", self.now)))?;
        if let Some(want) = expect {
            if b != want {
                return Err(Error::Domain(format!(
                    "expected bin {want} on top of stack {m}, found {b}"
                )));
            }
        }
        Ok((b, l))
    }

    fn phase(&mut self, robot: usize, request: Option<u64>, kind: TaskKind, start: u64, delivery: u64, gripper: u64) -> u64 {
        let end = start + delivery + gripper;
        self.log.phases.push(PhaseRecord {
            request,
            robot,
            kind,
            start,
            end,
            delivery,
            gripper,
        });
        let s = &mut self.log.robots[robot];
        s.delivery += delivery;
        s.gripper += gripper;
        end
    }

    fn occupy(&mut self, robot: usize, end: u64, completion: Completion, unlock: Vec<StackId>, end_pos: Coord) {
        let pos = self.free.iter().position(|&r| r == robot).expect("robot free");
        self.free.remove(pos);
        self.robots[robot].busy = Some(Busy {
            completion,
            unlock,
            end_pos,
        });
        self.schedule(end, Event::JobDone(robot));
    }

    fn placement_eligible(&self, m: StackId, exclude: &[StackId]) -> bool {
        !self.locked[m]
            && m < self.occupied
            && Some(m) != self.lcp.as_ref().map(|s| s.buffer_stack)
            && !exclude.contains(&m)
    }

    fn placement_room(&self, m: StackId) -> usize {
        let h = self.sc.spec.height;
        let used = self.home[m].len().max(self.bgc.fill_level(m));
        h.saturating_sub(used) + usize::from(self.bgc.temp(m).is_none())
    }

    fn dig_plan(&self, stack: StackId, bins: &[BinId], exclude: &[StackId]) -> Option<Vec<(BinId, StackId)>> {
        dig_placement_plan(
            &self.sc.spec,
            stack,
            bins,
            |m| self.placement_eligible(m, exclude),
            |m| self.placement_room(m),
        )
        .ok()
    }

    /// Bins above `bin` in `stack`, top-down.
    fn bins_above(&self, stack: StackId, bin: BinId) -> Vec<BinId> {
        let s = self.bgc.stack(stack);
        let i = s.iter().position(|&b| b == bin).expect("bin in stack");
        s[i + 1..].iter().rev().copied().collect()
    }

    // ---- retrieval ----

    fn try_retrieval(&mut self) -> Result<bool> {
        for i in 0..self.retrievals.len() {
            let v = self.retrievals[i];
            let bin = self.visits[v].bin;
            let Some((layer, stack)) = self.bgc.locate(bin) else { continue };
            if layer == 0 || self.locked[stack] {
                continue;
            }
            let above = self.bins_above(stack, bin);
            let Some(plan) = self.dig_plan(stack, &above, &[]) else { continue };
            self.retrievals.remove(i);
            self.commit_retrieval(v, stack, plan)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn commit_retrieval(&mut self, v: usize, stack: StackId, plan: Vec<(BinId, StackId)>) -> Result<()> {
        let robot = self.free[0];
        let (bin, req, ws) = {
            let visit = &self.visits[v];
            (visit.bin, visit.request, visit.workstation)
        };
        let mut touched: Vec<StackId> = vec![stack];
        for &(_, m) in &plan {
            if !touched.contains(&m) {
                touched.push(m);
            }
        }
        self.lock(&touched);

        let t0 = self.now;
        let target = self.coord(stack);
        let d1 = self.travel(self.robots[robot].pos, target);
        let at_stack = self.phase(robot, Some(req), TaskKind::Delivery1, t0, d1, 0);

        let mut dig = 0;
        let mut parked = Vec::with_capacity(plan.len());
        for &(b, m) in &plan {
            let (_, l) = self.take_top(stack, Some(b))?;
            let k = self.bgc.place(m, b)?;
            dig += self.pick(l) + self.place(k);
            parked.push((b, m, k));
        }
        let (_, depth) = self.take_top(stack, Some(bin))?;
        dig += self.pick(depth);
        self.off_grid.insert(bin);
        let dug = self.phase(robot, Some(req), TaskKind::Digging, at_stack, 0, dig);

        let ws_coord = self.sc.spec.workstations[ws];
        let d2 = self.travel(target, ws_coord);
        let at_ws = self.phase(robot, Some(req), TaskKind::Delivery2, dug, d2, 0);
        let release = micros(self.sc.kinematics.unload);
        let released = self.phase(robot, Some(req), TaskKind::Release, at_ws, 0, release);

        let rec = &mut self.log.requests[req as usize];
        rec.stack = Some(stack);
        rec.depth = depth;
        rec.bins_above = plan.len();
        rec.robot = Some(robot);
        rec.dispatch = t0;
        rec.at_stack = at_stack;
        rec.dug = dug;
        rec.at_workstation = at_ws;
        rec.released = released;

        let restore: Vec<(BinId, StackId)> = match reshuffle_mode(self.sc.policy) {
            RestoreBehavior::All => parked.iter().map(|&(b, m, _)| (b, m)).collect(),
            RestoreBehavior::TemporaryOnly => {
                for &(b, m, k) in &parked {
                    if k != 0 {
                        self.home[stack].retain(|&x| x != b);
                        self.home[m].push(b);
                    }
                }
                parked.iter().filter(|p| p.2 == 0).map(|&(b, m, _)| (b, m)).collect()
            }
        };
        let dig_unlock: Vec<StackId>;
        let job = if restore.is_empty() {
            dig_unlock = touched;
            None
        } else {
            let mut keep = vec![stack];
            for &(_, m) in &restore {
                if !keep.contains(&m) {
                    keep.push(m);
                }
            }
            dig_unlock = touched.into_iter().filter(|m| !keep.contains(m)).collect();
            Some(RestoreJob {
                request: req,
                target: stack,
                bins: restore,
                unlock: keep,
            })
        };
        self.dig_done[req as usize] = Some((job, dig_unlock));
        self.schedule(dug, Event::DigDone(req));
        self.occupy(robot, released, Completion::Retrieval { visit: v }, Vec::new(), ws_coord);
        Ok(())
    }

    // ---- reshuffle ----

    fn try_reshuffle(&mut self) -> Result<bool> {
        for i in 0..self.reshuffles.len() {
            match &self.reshuffles[i] {
                Reshuffle::Restore(_) => {
                    let Some(Reshuffle::Restore(job)) = self.reshuffles.remove(i) else {
                        unreachable!()
                    };
                    self.commit_restore(job)?;
                    return Ok(true);
                }
                Reshuffle::BufferCheck => {
                    let buffer = self.lcp.as_ref().expect("buffer checks need lcp").buffer_stack;
                    if self.locked[buffer] {
                        continue;
                    }
                    self.reshuffles.remove(i);
                    self.check_pending = false;
                    self.commit_buffer_check(buffer)?;
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn commit_restore(&mut self, job: RestoreJob) -> Result<()> {
        let robot = self.free[0];
        let target = self.coord(job.target);
        let mut pos = self.robots[robot].pos;
        let (mut d, mut g) = (0, 0);
        for &(b, m) in job.bins.iter().rev() {
            let at = self.coord(m);
            d += self.travel(pos, at);
            let (_, l) = self.take_top(m, Some(b))?;
            g += self.pick(l);
            d += self.travel(at, target);
            let k = self.bgc.place(job.target, b)?;
            g += self.place(k);
            pos = target;
        }
        let end = self.phase(robot, Some(job.request), TaskKind::Restore, self.now, d, g);
        self.occupy(robot, end, Completion::Other, job.unlock, pos);
        Ok(())
    }

    fn commit_buffer_check(&mut self, buffer: StackId) -> Result<()> {
        let moves = {
            let mut view = self.home.clone();
            view[buffer] = self.bgc.stack(buffer).to_vec();
            let locked = &self.locked;
            let available = |m: StackId| !locked[m] && m != buffer;
            let ctx = StorageContext {
                stacks: &view,
                height: self.sc.spec.height,
                available: &available,
            };
            buffer_check(self.lcp.as_ref().expect("lcp"), &ctx)
        };
        if moves.is_empty() {
            return Ok(());
        }
        let before = sets_distance(&self.home, &self.groups) as i64;
        let mut touched = vec![buffer];
        for mv in &moves {
            self.home[buffer].retain(|&x| x != mv.bin);
            self.home[mv.destination].push(mv.bin);
            if !touched.contains(&mv.destination) {
                touched.push(mv.destination);
            }
        }
        let delta = sets_distance(&self.home, &self.groups) as i64 - before;
        self.log.buffer_checks.push(BufferCheckRecord {
            time: self.now,
            moves: moves.clone(),
            delta,
        });
        self.lock(&touched);
        let robot = self.free[0];
        let from = self.coord(buffer);
        let mut pos = self.robots[robot].pos;
        let (mut d, mut g) = (0, 0);
        for mv in &moves {
            d += self.travel(pos, from);
            let (_, l) = self.take_top(buffer, Some(mv.bin))?;
            g += self.pick(l);
            let to = self.coord(mv.destination);
            d += self.travel(from, to);
            let k = self.bgc.place(mv.destination, mv.bin)?;
            g += self.place(k);
            pos = to;
        }
        let end = self.phase(robot, None, TaskKind::BufferCheck, self.now, d, g);
        self.occupy(robot, end, Completion::Other, touched, pos);
        Ok(())
    }

    // ---- return ----

    fn try_return(&mut self) -> Result<bool> {
        for i in 0..self.returns.len() {
            let v = self.returns[i];
            if let Some(plan) = self.plan_return(v)? {
                self.returns.remove(i);
                self.commit_return(v, plan)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Decides the storage stack for visit `v` and commits the home contents.
    /// Leaves everything untouched and returns `None` when the decision
    /// cannot execute yet.
    fn plan_return(&mut self, v: usize) -> Result<Option<ReturnPlan>> {
        let bin = self.visits[v].bin;
        let (origin, idx) = self
            .home
            .iter()
            .enumerate()
            .find_map(|(m, s)| s.iter().position(|&b| b == bin).map(|i| (m, i)))
            .expect("away bins keep a home");
        let before = sets_distance(&self.home, &self.groups) as i64;
        self.home[origin].remove(idx);

        let decision = {
            let locked = &self.locked;
            let available = |m: StackId| !locked[m];
            let ctx = StorageContext {
                stacks: &self.home,
                height: self.sc.spec.height,
                available: &available,
            };
            match &self.lcp {
                Some(state) => match lcp_select_storage(state, &ctx, bin, origin) {
                    Ok(d) => Some(d),
                    Err(Error::Capacity(_)) => None,
                    Err(e) => return Err(e),
                },
                None => baseline_select_storage(&ctx, self.occupied, &mut self.storage_rng),
            }
        };
        let mut plan = decision.and_then(|d| {
            if d.touched_stacks().iter().any(|&m| self.locked[m]) {
                return None;
            }
            let swap_plan = match d.swap {
                Some(s) => {
                    let above = self.bins_above(s.source, s.bin);
                    Some(self.dig_plan(s.source, &above, &[s.source, s.destination])?)
                }
                None => None,
            };
            Some(ReturnPlan {
                decision: d,
                origin,
                swap_plan,
                delta: 0,
            })
        });
        match &mut plan {
            None => self.home[origin].insert(idx, bin),
            Some(p) => {
                if let Some(s) = p.decision.swap {
                    self.home[s.source].retain(|&x| x != s.bin);
                    self.home[s.destination].push(s.bin);
                }
                self.home[p.decision.destination].push(bin);
                p.delta = sets_distance(&self.home, &self.groups) as i64 - before;
            }
        }
        Ok(plan)
    }

    fn commit_return(&mut self, v: usize, plan: ReturnPlan) -> Result<()> {
        let robot = self.free[0];
        let (bin, req, ws) = {
            let visit = &self.visits[v];
            (visit.bin, visit.request, visit.workstation)
        };
        self.visit_of[bin as usize] = None;
        let d = plan.decision;
        self.log.decisions.push(DecisionRecord {
            request: req,
            time: self.now,
            bin,
            origin: plan.origin,
            from_buffer: self.lcp.as_ref().map(|s| s.buffer_stack) == Some(plan.origin),
            decision: d,
            delta: plan.delta,
        });
        let mut touched = d.touched_stacks();
        if let Some(sp) = &plan.swap_plan {
            for &(_, m) in sp {
                if !touched.contains(&m) {
                    touched.push(m);
                }
            }
        }
        self.lock(&touched);

        let mut t = self.now;
        let mut pos = self.robots[robot].pos;
        if let (Some(s), Some(sp)) = (d.swap, &plan.swap_plan) {
            let src = self.coord(s.source);
            let dst = self.coord(s.destination);
            let mut dd = self.travel(pos, src);
            let mut g = 0;
            for &(b, m) in sp {
                let (_, l) = self.take_top(s.source, Some(b))?;
                let k = self.bgc.place(m, b)?;
                g += self.pick(l) + self.place(k);
            }
            let (_, l) = self.take_top(s.source, Some(s.bin))?;
            g += self.pick(l);
            dd += self.travel(src, dst);
            let k = self.bgc.place(s.destination, s.bin)?;
            g += self.place(k);
            dd += self.travel(dst, src);
            for &(b, m) in sp.iter().rev() {
                let (_, l) = self.take_top(m, Some(b))?;
                let k = self.bgc.place(s.source, b)?;
                g += self.pick(l) + self.place(k);
            }
            t = self.phase(robot, Some(req), TaskKind::Swap, t, dd, g);
            pos = src;
        }
        let ws_coord = self.sc.spec.workstations[ws];
        let dest = self.coord(d.destination);
        let dd = self.travel(pos, ws_coord) + self.travel(ws_coord, dest);
        let load = micros(self.sc.kinematics.load);
        t = self.phase(robot, Some(req), TaskKind::Delivery3, t, dd, load);
        self.off_grid.remove(&bin);
        let k = self.bgc.place(d.destination, bin)?;
        let g = self.place(k);
        t = self.phase(robot, Some(req), TaskKind::Insert, t, 0, g);
        self.occupy(robot, t, Completion::Return, touched, dest);
        Ok(())
    }
}

struct ReturnPlan {
    decision: StorageDecision,
    origin: StackId,
    swap_plan: Option<Vec<(BinId, StackId)>>,
    delta: i64,
}

/// Per-case counts of LCP decisions whose logged delta differs from the
/// expected value, and whether the snapshot distances never increase.
pub fn lcp_delta_violations(log: &EventLog) -> (usize, bool) {
    let bad = log
        .decisions
        .iter()
        .filter(|d| {
            let want = if d.from_buffer {
                d.decision.kind.expected_delta_from_buffer()
            } else {
                d.decision.kind.expected_delta()
            };
            want != Some(d.delta)
        })
        .count();
    let monotone = log.snapshots.windows(2).all(|w| w[1].distance <= w[0].distance);
    (bad, monotone)
}

/// Snapshots after which equivalence (or quasi-equivalence) was lost again.
pub fn invariance_violations(log: &EventLog) -> usize {
    let mut count = 0;
    let (mut eq, mut quasi) = (false, false);
    for s in &log.snapshots {
        if (eq && !s.equivalent) || (quasi && !s.quasi) {
            count += 1;
        }
        eq |= s.equivalent;
        quasi |= s.quasi;
    }
    count
}
