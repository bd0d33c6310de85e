//! Parallel execution of a configuration's run grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunKey, ScenarioConfig};
use crate::error::Result;
use crate::report::ReportBundle;
use crate::sim;

#[derive(Debug, Clone, Serialize)]
pub struct BatchFailure {
    pub key: RunKey,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchResult {
    /// Successful runs in run-key order.
    pub bundles: Vec<ReportBundle>,
    pub failures: Vec<BatchFailure>,
}

fn run_one(cfg: &ScenarioConfig, key: RunKey) -> Result<ReportBundle> {
    let scenario = cfg.scenario(key)?;
    let log = sim::run(&scenario)?;
    Ok(ReportBundle::from_log(&log, &scenario))
}

/// Runs `keys` in parallel. A failing run is reported and does not stop the
/// others; output order follows `keys` whatever the thread count.
pub fn run_keys(cfg: &ScenarioConfig, keys: &[RunKey]) -> BatchResult {
    let outcomes: Vec<_> = keys.par_iter().map(|&k| (k, run_one(cfg, k))).collect();
    let mut out = BatchResult::default();
    for (key, r) in outcomes {
        match r {
            Ok(b) => out.bundles.push(b),
            Err(e) => out.failures.push(BatchFailure {
                key,
                message: e.to_string(),
            }),
        }
    }
    out
}

/// Every run the configuration's batch grid names.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<BatchResult> {
    Ok(run_keys(cfg, &cfg.run_keys()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DESK_CONFIG;
    use crate::policy::PolicyKind;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::parse(DESK_CONFIG).unwrap();
        cfg.orders.horizon_hours = None;
        cfg.orders.horizon_requests = Some(200);
        cfg.simulation.seeds = vec![1, 2];
        cfg
    }

    #[test]
    fn order_is_independent_of_threads() {
        let cfg = small();
        let keys = cfg.run_keys().unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_keys(&cfg, &keys));
        let parallel = run_keys(&cfg, &keys);
        assert_eq!(serial.bundles, parallel.bundles);
        let got: Vec<_> = parallel
            .bundles
            .iter()
            .map(|b| (b.summary.policy, b.summary.randomization, b.summary.seed))
            .collect();
        let want: Vec<_> = keys.iter().map(|k| (k.policy, k.randomization, k.seed)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn failures_are_isolated() {
        let cfg = small();
        let mut keys = cfg.run_keys().unwrap();
        keys.truncate(2);
        // a randomization above 100 cannot be built
        keys.insert(
            1,
            RunKey {
                policy: PolicyKind::LayerComplete,
                randomization: 150,
                seed: 1,
            },
        );
        let r = run_keys(&cfg, &keys);
        assert_eq!(r.bundles.len(), 2);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].key.randomization, 150);
    }
}
