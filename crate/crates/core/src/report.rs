//! Metrics computed from event logs, and their CSV / JSON forms.
//!
//! Retrieval-time statistics cover requests that needed robot work; requests
//! for bins already bound for a workstation are counted in the histograms'
//! `workstation` bucket only.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::seconds;
use crate::policy::{DecisionKind, PolicyKind};
use crate::scenario::Scenario;
use crate::sim::{lcp_delta_violations, EventLog};

/// Smoothing window of the moving series, in requests.
pub const MOVING_WINDOW: usize = 1000;
/// Retrieval-time thresholds for exceedance counts, seconds.
pub const THRESHOLDS: [u32; 7] = [30, 40, 50, 60, 70, 80, 90];
pub const WORKSTATION_BUCKET: &str = "workstation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: PolicyKind,
    pub randomization: u32,
    pub seed: u64,
    /// Scenario description without policy and seed; bundles are comparable
    /// only when these match.
    pub scenario: String,
    pub empty_level: usize,
    pub requests: u64,
    pub robot_requests: u64,
    pub merged_requests: u64,
    pub mean_retrieval: f64,
    pub min_retrieval: f64,
    pub q1_retrieval: f64,
    pub median_retrieval: f64,
    pub q3_retrieval: f64,
    pub max_retrieval: f64,
    pub iqr_retrieval: f64,
    pub mean_waiting: f64,
    pub mean_delivery1: f64,
    pub mean_digging: f64,
    pub mean_delivery2: f64,
    /// Share of robot requests whose target sat at or above the surface layer.
    pub surface_fraction: f64,
    /// Share of robot requests with no bin above the target.
    pub zero_above_fraction: f64,
    pub robot_overall: f64,
    pub robot_delivery: f64,
    pub robot_gripper: f64,
    pub lambda: Option<u64>,
    pub lambda_quasi: Option<u64>,
    pub initial_distance: usize,
    pub final_distance: usize,
    pub case1: u64,
    pub case2: u64,
    pub case3: u64,
    pub case4: u64,
    pub case5: u64,
    pub buffer_moves: u64,
    pub delta_violations: u64,
    pub distance_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub bucket: String,
    pub count: u64,
}

/// Retrieval-time partition of one request, microseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub request: u64,
    pub retrieval: u64,
    pub waiting: u64,
    pub delivery1: u64,
    pub digging: u64,
    pub delivery2: u64,
    pub depth: usize,
    pub bins_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub index: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exceedance {
    pub threshold: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub summary: Summary,
    pub depth_histogram: Vec<Bucket>,
    pub above_histogram: Vec<Bucket>,
    pub samples: Vec<Sample>,
    pub moving_average: Vec<Point>,
    pub moving_max: Vec<Point>,
    pub exceedances: Vec<Exceedance>,
}

/// Scenario description used to decide comparability.
pub fn fingerprint(sc: &Scenario) -> String {
    let s = &sc.spec;
    format!(
        "{}x{}x{} bins {} ws {:?} robots {} rate {} proc {} horizon {:?} randomization {}",
        s.rows,
        s.cols,
        s.height,
        sc.catalog.len(),
        s.workstations.iter().map(|c| (c.row, c.col)).collect::<Vec<_>>(),
        sc.robots,
        sc.request_rate,
        sc.processing_time,
        sc.horizon,
        sc.randomization
    )
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Trailing-window mean and max; early points use the samples seen so far.
pub fn moving_series(values: &[f64], window: usize) -> (Vec<Point>, Vec<Point>) {
    let mut avg = Vec::with_capacity(values.len());
    let mut max = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        while deque.back().is_some_and(|&j| values[j] <= v) {
            deque.pop_back();
        }
        deque.push_back(i);
        if deque.front().is_some_and(|&j| j + window <= i) {
            deque.pop_front();
        }
        let n = (i + 1).min(window);
        avg.push(Point {
            index: i as u64,
            value: sum / n as f64,
        });
        max.push(Point {
            index: i as u64,
            value: values[*deque.front().expect("window non-empty")],
        });
    }
    (avg, max)
}

fn mean(values: impl Iterator<Item = u64>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    seconds(values.sum::<u64>()) / n as f64
}

impl ReportBundle {
    pub fn from_log(log: &EventLog, scenario: &Scenario) -> Self {
        let height = scenario.spec.height;
        let robot: Vec<_> = log.requests.iter().filter(|r| !r.merged).collect();
        let merged = (log.requests.len() - robot.len()) as u64;
        let samples: Vec<Sample> = robot
            .iter()
            .map(|r| Sample {
                request: r.id,
                retrieval: r.retrieval_time(),
                waiting: r.waiting(),
                delivery1: r.delivery1(),
                digging: r.digging(),
                delivery2: r.delivery2(),
                depth: r.depth,
                bins_above: r.bins_above,
            })
            .collect();
        let n = samples.len();

        let mut depth = vec![0u64; height + 1];
        let mut above = vec![0u64; height];
        for s in &samples {
            depth[s.depth] += 1;
            above[s.bins_above] += 1;
        }
        let histogram = |counts: &[u64], offset: usize| {
            std::iter::once(Bucket {
                bucket: WORKSTATION_BUCKET.into(),
                count: merged,
            })
            .chain(counts.iter().enumerate().skip(offset).map(|(i, &c)| Bucket {
                bucket: i.to_string(),
                count: c,
            }))
            .collect::<Vec<_>>()
        };

        let secs: Vec<f64> = samples.iter().map(|s| seconds(s.retrieval)).collect();
        let mut sorted = secs.clone();
        sorted.sort_by(f64::total_cmp);
        let (moving_average, moving_max) = moving_series(&secs, MOVING_WINDOW);
        let exceedances = THRESHOLDS
            .iter()
            .map(|&t| Exceedance {
                threshold: t,
                count: samples.iter().filter(|s| s.retrieval > t as u64 * 1_000_000).count() as u64,
            })
            .collect();

        let surface = log.empty_level + 1;
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let case = |kind: DecisionKind| log.decisions.iter().filter(|d| d.decision.kind == kind).count() as u64;
        let (violations, monotone) = lcp_delta_violations(log);
        let (violations, monotone) = if log.policy == PolicyKind::LayerComplete {
            (violations as u64, monotone)
        } else {
            (0, monotone)
        };
        let delivery: u64 = log.robots.iter().map(|r| r.delivery).sum();
        let gripper: u64 = log.robots.iter().map(|r| r.gripper).sum();

        let summary = Summary {
            policy: log.policy,
            randomization: log.randomization,
            seed: log.seed,
            scenario: fingerprint(scenario),
            empty_level: log.empty_level,
            requests: log.requests.len() as u64,
            robot_requests: n as u64,
            merged_requests: merged,
            mean_retrieval: mean(samples.iter().map(|s| s.retrieval), n),
            min_retrieval: sorted.first().copied().unwrap_or(0.0),
            q1_retrieval: quantile(&sorted, 0.25),
            median_retrieval: quantile(&sorted, 0.5),
            q3_retrieval: quantile(&sorted, 0.75),
            max_retrieval: sorted.last().copied().unwrap_or(0.0),
            iqr_retrieval: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
            mean_waiting: mean(samples.iter().map(|s| s.waiting), n),
            mean_delivery1: mean(samples.iter().map(|s| s.delivery1), n),
            mean_digging: mean(samples.iter().map(|s| s.digging), n),
            mean_delivery2: mean(samples.iter().map(|s| s.delivery2), n),
            surface_fraction: frac(samples.iter().filter(|s| s.depth <= surface).count()),
            zero_above_fraction: frac(samples.iter().filter(|s| s.bins_above == 0).count()),
            robot_overall: seconds(delivery + gripper),
            robot_delivery: seconds(delivery),
            robot_gripper: seconds(gripper),
            lambda: log.lambda(),
            lambda_quasi: log.lambda_quasi(),
            initial_distance: log.snapshots.first().map_or(0, |s| s.distance),
            final_distance: log.snapshots.last().map_or(0, |s| s.distance),
            case1: case(DecisionKind::Case1),
            case2: case(DecisionKind::Case2),
            case3: case(DecisionKind::Case3),
            case4: case(DecisionKind::Case4),
            case5: case(DecisionKind::Case5),
            buffer_moves: log.buffer_checks.iter().map(|b| b.moves.len() as u64).sum(),
            delta_violations: violations,
            distance_monotone: monotone,
        };
        Self {
            summary,
            depth_histogram: histogram(&depth, 1),
            above_histogram: histogram(&above, 0),
            samples,
            moving_average,
            moving_max,
            exceedances,
        }
    }

    pub fn exceedance(&self, threshold: u32) -> Option<u64> {
        self.exceedances.iter().find(|e| e.threshold == threshold).map(|e| e.count)
    }
}

/// Mean and sample standard deviation of a metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: PolicyKind,
    pub randomization: u32,
    pub metric: String,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

fn scalar_metrics(b: &ReportBundle) -> Vec<(String, f64)> {
    let s = &b.summary;
    let mut v = vec![
        ("mean_retrieval".to_string(), s.mean_retrieval),
        ("median_retrieval".into(), s.median_retrieval),
        ("iqr_retrieval".into(), s.iqr_retrieval),
        ("mean_digging".into(), s.mean_digging),
        ("surface_fraction".into(), s.surface_fraction),
        ("zero_above_fraction".into(), s.zero_above_fraction),
        ("robot_overall".into(), s.robot_overall),
        ("robot_delivery".into(), s.robot_delivery),
        ("robot_gripper".into(), s.robot_gripper),
        ("final_distance".into(), s.final_distance as f64),
    ];
    for e in &b.exceedances {
        v.push((format!("exceed_{}", e.threshold), e.count as f64));
    }
    v
}

/// Cross-seed aggregates, ordered by policy, randomization, then metric order.
pub fn aggregate(bundles: &[ReportBundle]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(PolicyKind, u32), Vec<&ReportBundle>> = BTreeMap::new();
    for b in bundles {
        groups
            .entry((b.summary.policy, b.summary.randomization))
            .or_default()
            .push(b);
    }
    let mut rows = Vec::new();
    for ((policy, randomization), group) in groups {
        let per_run: Vec<Vec<(String, f64)>> = group.iter().map(|b| scalar_metrics(b)).collect();
        for (i, (metric, _)) in per_run[0].iter().enumerate() {
            let xs: Vec<f64> = per_run.iter().map(|m| m[i].1).collect();
            let n = xs.len();
            let mu = xs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(AggregateRow {
                policy,
                randomization,
                metric: metric.clone(),
                runs: n,
                mean: mu,
                std,
            });
        }
    }
    rows
}

/// Percent reduction of a candidate policy against a baseline, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub randomization: u32,
    pub candidate: PolicyKind,
    pub baseline: PolicyKind,
    pub metric: String,
    pub candidate_value: f64,
    pub baseline_value: f64,
    /// `100 * (baseline - candidate) / baseline`; empty when the baseline is 0
    /// and the candidate is not.
    pub reduction_percent: Option<f64>,
}

pub fn percent_reduction(candidate: f64, baseline: f64) -> Option<f64> {
    if baseline == 0.0 {
        (candidate == 0.0).then_some(0.0)
    } else {
        Some(100.0 * (baseline - candidate) / baseline)
    }
}

/// Compares two sets of runs that differ only in policy. Runs are matched by
/// randomization and seed.
pub fn compare(candidate: &[ReportBundle], baseline: &[ReportBundle]) -> Result<Vec<ComparisonRow>> {
    let index = |bs: &[ReportBundle]| -> Result<BTreeMap<(u32, u64), ReportBundle>> {
        let mut m = BTreeMap::new();
        for b in bs {
            let key = (b.summary.randomization, b.summary.seed);
            if m.insert(key, b.clone()).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate run for randomization {} seed {}",
                    key.0, key.1
                )));
            }
        }
        Ok(m)
    };
    let (c, b) = (index(candidate)?, index(baseline)?);
    if c.keys().ne(b.keys()) {
        return Err(Error::Validation("runs cover different randomizations or seeds".into()));
    }
    let mut pooled: BTreeMap<u32, (PolicyKind, PolicyKind, Vec<f64>, Vec<f64>, Vec<String>)> = BTreeMap::new();
    for (key, cb) in &c {
        let bb = &b[key];
        if cb.summary.scenario != bb.summary.scenario {
            return Err(Error::Validation(format!(
                "scenarios differ beyond policy: {:?} vs {:?}",
                cb.summary.scenario, bb.summary.scenario
            )));
        }
        let metrics = |x: &ReportBundle| -> Vec<(String, f64)> {
            let mut v: Vec<(String, f64)> = x
                .exceedances
                .iter()
                .map(|e| (format!("exceed_{}", e.threshold), e.count as f64))
                .collect();
            let s = &x.summary;
            v.push(("robot_overall".into(), s.robot_overall));
            v.push(("robot_delivery".into(), s.robot_delivery));
            v.push(("robot_gripper".into(), s.robot_gripper));
            v.push(("mean_retrieval".into(), s.mean_retrieval * s.robot_requests as f64));
            v.push(("robot_requests".into(), s.robot_requests as f64));
            v
        };
        let (mc, mb) = (metrics(cb), metrics(bb));
        let entry = pooled.entry(key.0).or_insert_with(|| {
            (
                cb.summary.policy,
                bb.summary.policy,
                vec![0.0; mc.len()],
                vec![0.0; mb.len()],
                mc.iter().map(|m| m.0.clone()).collect(),
            )
        });
        for (i, (_, v)) in mc.iter().enumerate() {
            entry.2[i] += v;
        }
        for (i, (_, v)) in mb.iter().enumerate() {
            entry.3[i] += v;
        }
    }
    let mut rows = Vec::new();
    for (randomization, (cp, bp, cv, bv, names)) in pooled {
        let n = names.len();
        // the last two entries pool mean retrieval as total time over requests
        let (c_req, b_req) = (cv[n - 1], bv[n - 1]);
        for i in 0..n - 1 {
            let (mut x, mut y) = (cv[i], bv[i]);
            if names[i] == "mean_retrieval" {
                x = if c_req > 0.0 { x / c_req } else { 0.0 };
                y = if b_req > 0.0 { y / b_req } else { 0.0 };
            }
            rows.push(ComparisonRow {
                randomization,
                candidate: cp,
                baseline: bp,
                metric: names[i].clone(),
                candidate_value: x,
                baseline_value: y,
                reduction_percent: percent_reduction(x, y),
            });
        }
    }
    Ok(rows)
}

/// The layer complete policy against each baseline present in `bundles`.
pub fn compare_policies(bundles: &[ReportBundle]) -> Result<Vec<ComparisonRow>> {
    let of = |p: PolicyKind| -> Vec<ReportBundle> {
        bundles.iter().filter(|b| b.summary.policy == p).cloned().collect()
    };
    let lcp = of(PolicyKind::LayerComplete);
    if lcp.is_empty() {
        return Err(Error::Validation("no layer_complete runs to compare".into()));
    }
    let mut rows = Vec::new();
    for base in [PolicyKind::DelayedReshuffle, PolicyKind::ImmediateReshuffle] {
        let b = of(base);
        if !b.is_empty() {
            rows.extend(compare(&lcp, &b)?);
        }
    }
    if rows.is_empty() {
        return Err(Error::Validation("no baseline runs to compare against".into()));
    }
    Ok(rows)
}

// ---- emission ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Serialize, Deserialize)]
struct BucketRow {
    policy: PolicyKind,
    randomization: u32,
    seed: u64,
    bucket: String,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    policy: PolicyKind,
    randomization: u32,
    seed: u64,
    request: u64,
    retrieval_us: u64,
    waiting_us: u64,
    delivery1_us: u64,
    digging_us: u64,
    delivery2_us: u64,
    depth: usize,
    bins_above: usize,
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    policy: PolicyKind,
    randomization: u32,
    seed: u64,
    index: u64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ExceedanceRow {
    policy: PolicyKind,
    randomization: u32,
    seed: u64,
    threshold: u32,
    count: u64,
}

type Key = (PolicyKind, u32, u64);

fn key(s: &Summary) -> Key {
    (s.policy, s.randomization, s.seed)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut any = false;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        any = true;
    }
    if !any {
        w.write_record(header)
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const SUMMARY_CSV: &str = "summary.csv";
const DEPTH_CSV: &str = "depth_histogram.csv";
const ABOVE_CSV: &str = "above_histogram.csv";
const SAMPLES_CSV: &str = "retrieval_samples.csv";
const AVERAGE_CSV: &str = "moving_average.csv";
const MAX_CSV: &str = "moving_max.csv";
const EXCEED_CSV: &str = "exceedances.csv";

const KEY_HEADER: [&str; 3] = ["policy", "randomization", "seed"];

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    KEY_HEADER.iter().copied().chain(extra.iter().copied()).collect()
}

fn summary_header() -> Vec<&'static str> {
    vec![
        "policy", "randomization", "seed", "scenario", "empty_level", "requests", "robot_requests",
        "merged_requests", "mean_retrieval", "min_retrieval", "q1_retrieval", "median_retrieval",
        "q3_retrieval", "max_retrieval", "iqr_retrieval", "mean_waiting", "mean_delivery1",
        "mean_digging", "mean_delivery2", "surface_fraction", "zero_above_fraction",
        "robot_overall", "robot_delivery", "robot_gripper", "lambda", "lambda_quasi",
        "initial_distance", "final_distance", "case1", "case2", "case3", "case4", "case5",
        "buffer_moves", "delta_violations", "distance_monotone",
    ]
}

/// Writes the bundles into `dir`: one CSV per table (rows keyed by policy,
/// randomization and seed) and/or one JSON document per bundle. Returns the
/// files written.
pub fn emit_reports(bundles: &[ReportBundle], dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let p = dir.join(SUMMARY_CSV);
        write_rows(&p, &summary_header(), bundles.iter().map(|b| &b.summary))?;
        written.push(p);
        for (name, pick) in [
            (DEPTH_CSV, (|b: &ReportBundle| &b.depth_histogram) as fn(&ReportBundle) -> &Vec<Bucket>),
            (ABOVE_CSV, |b: &ReportBundle| &b.above_histogram),
        ] {
            let p = dir.join(name);
            write_rows(
                &p,
                &header(&["bucket", "count"]),
                bundles.iter().flat_map(|b| {
                    let (policy, randomization, seed) = key(&b.summary);
                    pick(b).iter().map(move |h| BucketRow {
                        policy,
                        randomization,
                        seed,
                        bucket: h.bucket.clone(),
                        count: h.count,
                    })
                }),
            )?;
            written.push(p);
        }
        let p = dir.join(SAMPLES_CSV);
        write_rows(
            &p,
            &header(&[
                "request", "retrieval_us", "waiting_us", "delivery1_us", "digging_us", "delivery2_us", "depth",
                "bins_above",
            ]),
            bundles.iter().flat_map(|b| {
                let (policy, randomization, seed) = key(&b.summary);
                b.samples.iter().map(move |s| SampleRow {
                    policy,
                    randomization,
                    seed,
                    request: s.request,
                    retrieval_us: s.retrieval,
                    waiting_us: s.waiting,
                    delivery1_us: s.delivery1,
                    digging_us: s.digging,
                    delivery2_us: s.delivery2,
                    depth: s.depth,
                    bins_above: s.bins_above,
                })
            }),
        )?;
        written.push(p);
        for (name, pick) in [
            (AVERAGE_CSV, (|b: &ReportBundle| &b.moving_average) as fn(&ReportBundle) -> &Vec<Point>),
            (MAX_CSV, |b: &ReportBundle| &b.moving_max),
        ] {
            let p = dir.join(name);
            write_rows(
                &p,
                &header(&["index", "value"]),
                bundles.iter().flat_map(|b| {
                    let (policy, randomization, seed) = key(&b.summary);
                    pick(b).iter().map(move |pt| PointRow {
                        policy,
                        randomization,
                        seed,
                        index: pt.index,
                        value: pt.value,
                    })
                }),
            )?;
            written.push(p);
        }
        let p = dir.join(EXCEED_CSV);
        write_rows(
            &p,
            &header(&["threshold", "count"]),
            bundles.iter().flat_map(|b| {
                let (policy, randomization, seed) = key(&b.summary);
                b.exceedances.iter().map(move |e| ExceedanceRow {
                    policy,
                    randomization,
                    seed,
                    threshold: e.threshold,
                    count: e.count,
                })
            }),
        )?;
        written.push(p);
    }
    if matches!(format, Format::Json | Format::Both) {
        for b in bundles {
            let (policy, randomization, seed) = key(&b.summary);
            let p = dir.join(format!("bundle_{policy}_{randomization}_{seed}.json"));
            let text = serde_json::to_string_pretty(b).map_err(|e| Error::Serde(e.to_string()))?;
            fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

/// Rebuilds bundles from the CSV tables written by [`emit_reports`].
pub fn read_csv_reports(dir: &Path) -> Result<Vec<ReportBundle>> {
    let summaries: Vec<Summary> = read_rows(&dir.join(SUMMARY_CSV))?;
    let mut bundles: BTreeMap<Key, ReportBundle> = BTreeMap::new();
    let mut order = Vec::new();
    for s in summaries {
        order.push(key(&s));
        bundles.insert(
            key(&s),
            ReportBundle {
                summary: s,
                depth_histogram: Vec::new(),
                above_histogram: Vec::new(),
                samples: Vec::new(),
                moving_average: Vec::new(),
                moving_max: Vec::new(),
                exceedances: Vec::new(),
            },
        );
    }
    fn get(bundles: &mut BTreeMap<Key, ReportBundle>, k: Key) -> Result<&mut ReportBundle> {
        bundles
            .get_mut(&k)
            .ok_or_else(|| Error::Validation(format!("row for unknown run {k:?}")))
    }
    for (name, depth) in [(DEPTH_CSV, true), (ABOVE_CSV, false)] {
        for r in read_rows::<BucketRow>(&dir.join(name))? {
            let b = get(&mut bundles, (r.policy, r.randomization, r.seed))?;
            let h = if depth { &mut b.depth_histogram } else { &mut b.above_histogram };
            h.push(Bucket {
                bucket: r.bucket,
                count: r.count,
            });
        }
    }
    for r in read_rows::<SampleRow>(&dir.join(SAMPLES_CSV))? {
        get(&mut bundles, (r.policy, r.randomization, r.seed))?.samples.push(Sample {
            request: r.request,
            retrieval: r.retrieval_us,
            waiting: r.waiting_us,
            delivery1: r.delivery1_us,
            digging: r.digging_us,
            delivery2: r.delivery2_us,
            depth: r.depth,
            bins_above: r.bins_above,
        });
    }
    for (name, avg) in [(AVERAGE_CSV, true), (MAX_CSV, false)] {
        for r in read_rows::<PointRow>(&dir.join(name))? {
            let b = get(&mut bundles, (r.policy, r.randomization, r.seed))?;
            let series = if avg { &mut b.moving_average } else { &mut b.moving_max };
            series.push(Point {
                index: r.index,
                value: r.value,
            });
        }
    }
    for r in read_rows::<ExceedanceRow>(&dir.join(EXCEED_CSV))? {
        get(&mut bundles, (r.policy, r.randomization, r.seed))?.exceedances.push(Exceedance {
            threshold: r.threshold,
            count: r.count,
        });
    }
    Ok(order.into_iter().map(|k| bundles.remove(&k).expect("present")).collect())
}

/// Writes rows of any serializable table to a CSV file.
pub fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    write_rows(path, header, rows.iter())
}
