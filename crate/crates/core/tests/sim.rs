use rcs_core::kinematics::{leg_time, RobotKinematics};
use rcs_core::model::{normalize_catalog, BinCatalog, Bgc, Coord, GridSpec};
use rcs_core::policy::{DecisionKind, PolicyKind};
use rcs_core::scenario::{Horizon, Scenario};
use rcs_core::sim::{invariance_violations, lcp_delta_violations, run, run_with, TaskKind};

fn geometric(n: usize, q: f64) -> BinCatalog {
    normalize_catalog(&(0..n).map(|i| q.powi(i as i32)).collect::<Vec<_>>()).unwrap()
}

fn desk(policy: PolicyKind, randomization: u32, seed: u64) -> Scenario {
    let mut s = Scenario::desk(policy, geometric(230, 0.98));
    s.randomization = randomization;
    s.seed = seed;
    s.horizon = Horizon::Requests(1500);
    s
}

#[test]
fn single_request_trace() {
    // one bin at the bottom of stack 0 of a 1 x 3 strip, workstation two cells away
    let spec = GridSpec {
        rows: 1,
        cols: 3,
        height: 2,
        reserve_fraction: 0.5,
        fill_level: 1,
        cell_length: 0.65,
        cell_width: 0.45,
        bin_height: 0.33,
        workstations: vec![Coord::new(0, 2)],
        buffer_stack: None,
    };
    let mut sc = Scenario::desk(PolicyKind::ImmediateReshuffle, BinCatalog::from_sorted(vec![1.0]).unwrap());
    sc.spec = spec;
    sc.robots = 1;
    sc.horizon = Horizon::Requests(1);
    let log = run_with(&sc, true).unwrap();
    log.check().unwrap();
    let r = &log.requests[0];
    let us = |s: f64| (s * 1e6).round() as u64;
    let k = RobotKinematics::default();
    // robot starts at the workstation and drives two cells to stack 0
    let drive = us(2.0 * (1.3f64 / 0.8).sqrt());
    assert_eq!(us(leg_time(1.3, &k)), drive);
    // layer 2 of a 2-high stack: down and up two cells, then load
    let dig = us(4.0 * 0.33 / 1.6) + us(1.2);
    assert_eq!(r.depth, 2);
    assert_eq!(r.bins_above, 0);
    assert_eq!(r.waiting(), 0);
    assert_eq!(r.delivery1(), drive);
    assert_eq!(r.digging(), dig);
    assert_eq!(r.delivery2(), drive);
    assert_eq!(r.released - r.at_workstation, us(1.0));
    assert_eq!(r.retrieval_time(), 2 * drive + dig);
    // return: after 30 s processing the robot loads, drives back and inserts at layer 2
    let kinds: Vec<TaskKind> = log.phases.iter().map(|p| p.kind).collect();
    assert_eq!(
        kinds,
        vec![
            TaskKind::Delivery1,
            TaskKind::Digging,
            TaskKind::Delivery2,
            TaskKind::Release,
            TaskKind::Delivery3,
            TaskKind::Insert
        ]
    );
    let d3 = &log.phases[4];
    assert_eq!(d3.start, r.released + us(30.0));
    assert_eq!(d3.end - d3.start, drive + us(1.2));
    let ins = &log.phases[5];
    assert_eq!(ins.end - ins.start, us(4.0 * 0.33 / 1.6) + us(1.0));
    assert_eq!(log.end_time, ins.end);
}

#[test]
fn repeated_runs_are_identical() {
    for policy in PolicyKind::ALL {
        let sc = desk(policy, 40, 3);
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a.to_ndjson(), b.to_ndjson());
    }
}

#[test]
fn audited_runs_keep_invariants() {
    for policy in PolicyKind::ALL {
        for pct in [0, 40, 100] {
            let log = run_with(&desk(policy, pct, 11), true).unwrap();
            log.check().unwrap();
            assert_eq!(log.requests.len(), 1500);
            for r in &log.requests {
                assert_eq!(
                    r.retrieval_time(),
                    r.waiting() + r.delivery1() + r.digging() + r.delivery2()
                );
            }
        }
    }
}

#[test]
fn lcp_distance_never_increases() {
    for seed in 0..3 {
        let log = run(&desk(PolicyKind::LayerComplete, 100, seed)).unwrap();
        let (bad, monotone) = lcp_delta_violations(&log);
        assert_eq!(bad, 0);
        assert!(monotone);
        assert_eq!(invariance_violations(&log), 0);
        let first = log.snapshots.first().unwrap().distance;
        let last = log.snapshots.last().unwrap().distance;
        assert!(last < first, "{first} -> {last}");
        assert!(log.decisions.iter().any(|d| d.decision.kind == DecisionKind::Case2));
    }
}

#[test]
fn optimal_start_is_equivalent() {
    let log = run(&desk(PolicyKind::LayerComplete, 0, 1)).unwrap();
    assert_eq!(log.lambda(), Some(0));
    assert!(log.snapshots.iter().all(|s| s.equivalent));
}

#[test]
fn requests_for_bins_at_workstations_need_no_robot() {
    let mut sc = desk(PolicyKind::ImmediateReshuffle, 0, 4);
    // one very popular bin keeps coming back while it is still at a workstation
    let mut w = vec![1.0; 230];
    w[0] = 500.0;
    sc.catalog = normalize_catalog(&w).unwrap();
    let log = run_with(&sc, true).unwrap();
    let merged: Vec<_> = log.requests.iter().filter(|r| r.merged).collect();
    assert!(!merged.is_empty());
    for r in &merged {
        assert_eq!(r.depth, 0);
        assert_eq!(r.retrieval_time(), 0);
        assert!(log.phases.iter().all(|p| p.request != Some(r.id)));
    }
}

#[test]
fn explicit_initial_configuration() {
    let mut sc = desk(PolicyKind::DelayedReshuffle, 0, 4);
    let mut stacks: Vec<Vec<u32>> = vec![Vec::new(); 48];
    for b in 1..=230u32 {
        stacks[((b - 1) % 46) as usize].push(b);
    }
    sc.initial = Some(Bgc::from_stacks(6, stacks).unwrap());
    let log = run_with(&sc, true).unwrap();
    log.check().unwrap();
    let mut short: Vec<Vec<u32>> = vec![Vec::new(); 48];
    for b in 1..230u32 {
        short[((b - 1) % 46) as usize].push(b);
    }
    sc.initial = Some(Bgc::from_stacks(6, short).unwrap());
    assert!(run(&sc).is_err());
}
