use rcs_core::config::{RunKey, ScenarioConfig, DESK_CONFIG};
use rcs_core::policy::PolicyKind;
use rcs_core::report::{
    compare, compare_policies, emit_reports, read_csv_reports, Format, ReportBundle, WORKSTATION_BUCKET,
};
use rcs_core::sim;

fn bundle(policy: PolicyKind, seed: u64, requests: u64) -> ReportBundle {
    let mut cfg = ScenarioConfig::parse(DESK_CONFIG).unwrap();
    cfg.orders.horizon_hours = None;
    cfg.orders.horizon_requests = Some(requests);
    let sc = cfg
        .scenario(RunKey {
            policy,
            randomization: 40,
            seed,
        })
        .unwrap();
    let log = sim::run(&sc).unwrap();
    ReportBundle::from_log(&log, &sc)
}

#[test]
fn partition_and_histograms_add_up() {
    let b = bundle(PolicyKind::LayerComplete, 3, 1200);
    let s = &b.summary;
    assert_eq!(s.requests, 1200);
    assert_eq!(s.robot_requests + s.merged_requests, s.requests);
    for h in [&b.depth_histogram, &b.above_histogram] {
        assert_eq!(h.iter().map(|x| x.count).sum::<u64>(), s.requests);
        assert_eq!(h[0].bucket, WORKSTATION_BUCKET);
        assert_eq!(h[0].count, s.merged_requests);
    }
    for x in &b.samples {
        assert_eq!(x.waiting + x.delivery1 + x.digging + x.delivery2, x.retrieval);
    }
    let parts = s.mean_waiting + s.mean_delivery1 + s.mean_digging + s.mean_delivery2;
    assert!((parts - s.mean_retrieval).abs() < 1e-9);
    assert!(s.q1_retrieval <= s.median_retrieval && s.median_retrieval <= s.q3_retrieval);
    assert!(s.min_retrieval <= s.q1_retrieval && s.q3_retrieval <= s.max_retrieval);
    let counts: Vec<u64> = b.exceedances.iter().map(|e| e.count).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(b.moving_average.len(), b.samples.len());
    assert!((s.robot_delivery + s.robot_gripper - s.robot_overall).abs() < 1e-6);
    assert_eq!(s.delta_violations, 0);
    assert!(s.distance_monotone);
}

#[test]
fn csv_round_trip_reproduces_bundles() {
    let bundles = vec![
        bundle(PolicyKind::LayerComplete, 1, 400),
        bundle(PolicyKind::DelayedReshuffle, 1, 400),
    ];
    let dir = tempfile::tempdir().unwrap();
    let files = emit_reports(&bundles, dir.path(), Format::Both).unwrap();
    assert_eq!(files.len(), 7 + 2);
    let back = read_csv_reports(dir.path()).unwrap();
    assert_eq!(back.len(), bundles.len());
    assert_eq!(back, bundles);
    let json = std::fs::read_to_string(dir.path().join("bundle_layer_complete_40_1.json")).unwrap();
    let back: ReportBundle = serde_json::from_str(&json).unwrap();
    assert_eq!(back, bundles[0]);
}

#[test]
fn empty_output_has_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&[], dir.path(), Format::Csv).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("policy,randomization,seed,scenario,"));
    let samples = std::fs::read_to_string(dir.path().join("retrieval_samples.csv")).unwrap();
    assert_eq!(samples.trim_end(), "policy,randomization,seed,request,retrieval_us,waiting_us,delivery1_us,digging_us,delivery2_us,depth,bins_above");
    assert!(read_csv_reports(dir.path()).unwrap().is_empty());
}

#[test]
fn self_comparison_is_zero() {
    let b = vec![bundle(PolicyKind::ImmediateReshuffle, 2, 300)];
    let rows = compare(&b, &b).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.reduction_percent == Some(0.0)));
}

#[test]
fn mismatched_scenarios_are_refused() {
    let a = vec![bundle(PolicyKind::LayerComplete, 2, 300)];
    let mut b = vec![bundle(PolicyKind::DelayedReshuffle, 2, 300)];
    assert!(compare_policies(&[a[0].clone(), b[0].clone()]).is_ok());
    b[0].summary.scenario.push_str(" robots 9");
    assert!(compare(&a, &b).is_err());
    let other_seed = vec![bundle(PolicyKind::DelayedReshuffle, 5, 300)];
    assert!(compare(&a, &other_seed).is_err());
    assert!(compare_policies(&a).is_err());
}
