//! Scenario configuration files (TOML).
//!
//! Every section except `[policy]` is optional and falls back to the
//! desk-scale defaults. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::RobotKinematics;
use crate::model::{normalize_catalog, pad_with_empty_bins, BinCatalog, Coord, GridSpec, StackId};
use crate::policy::{PolicyKind, DEFAULT_CHECK_PERIOD, DEFAULT_EPSILON};
use crate::scenario::{Horizon, Scenario};
use crate::solver::optimal_empty_level_in;
use crate::cost::CostTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub bins: BinsSection,
    #[serde(default)]
    pub popularity: PopularityModel,
    pub policy: Option<PolicySection>,
    #[serde(default)]
    pub robots: RobotsSection,
    #[serde(default)]
    pub kinematics: RobotKinematics,
    #[serde(default)]
    pub orders: OrdersSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub batch: Option<BatchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
    pub height: usize,
    pub reserve_fraction: f64,
    pub empty_level: EmptyLevel,
    pub cell_length: f64,
    pub cell_width: f64,
    pub bin_height: f64,
    /// `[row, col]` pairs on the footprint perimeter.
    pub workstations: Vec<[usize; 2]>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            rows: 6,
            cols: 8,
            height: 6,
            reserve_fraction: 0.2,
            empty_level: EmptyLevel::Fixed(1),
            cell_length: 0.65,
            cell_width: 0.45,
            bin_height: 0.33,
            workstations: vec![[0, 3], [5, 4]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmptyLevel {
    Fixed(usize),
    Named(EmptyLevelName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyLevelName {
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinsSection {
    pub count: usize,
}

impl Default for BinsSection {
    fn default() -> Self {
        Self { count: 230 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopularityModel {
    /// `p_n` proportional to `n^-s`.
    Zipf { s: f64 },
    /// `p_n` proportional to `q^(n-1)`.
    TruncatedGeometric { q: f64 },
    /// The first `popular_fraction` of bins carry `popular_mass`; each
    /// segment decays geometrically by `decay` per bin; the last
    /// `zero_tail_fraction` of bins are never requested.
    Piecewise {
        popular_fraction: f64,
        popular_mass: f64,
        decay: f64,
        #[serde(default)]
        zero_tail_fraction: f64,
    },
    /// Raw weights, one per bin, sorted by the loader.
    Explicit { weights: Vec<f64> },
}

impl Default for PopularityModel {
    fn default() -> Self {
        PopularityModel::Piecewise {
            popular_fraction: 0.2,
            popular_mass: 0.8,
            decay: 0.98,
            zero_tail_fraction: 0.0,
        }
    }
}

impl PopularityModel {
    pub fn catalog(&self, count: usize) -> Result<BinCatalog> {
        let bad = |m: String| Err(Error::Validation(format!("popularity: {m}")));
        if count == 0 {
            return bad("at least one bin is required".into());
        }
        let weights: Vec<f64> = match *self {
            PopularityModel::Zipf { s } => {
                if !(s.is_finite() && s >= 0.0) {
                    return bad(format!("zipf exponent {s} must be non-negative"));
                }
                (1..=count).map(|n| (n as f64).powf(-s)).collect()
            }
            PopularityModel::TruncatedGeometric { q } => {
                if !(q > 0.0 && q <= 1.0) {
                    return bad(format!("geometric ratio {q} outside (0, 1]"));
                }
                (0..count).map(|n| q.powi(n as i32)).collect()
            }
            PopularityModel::Piecewise {
                popular_fraction,
                popular_mass,
                decay,
                zero_tail_fraction,
            } => piecewise(count, popular_fraction, popular_mass, decay, zero_tail_fraction)?,
            PopularityModel::Explicit { ref weights } => {
                if weights.len() != count {
                    return bad(format!("{} weights for {count} bins", weights.len()));
                }
                weights.clone()
            }
        };
        normalize_catalog(&weights)
    }
}

fn piecewise(count: usize, fraction: f64, mass: f64, decay: f64, zero: f64) -> Result<Vec<f64>> {
    let bad = |m: String| Err(Error::Validation(format!("popularity: {m}")));
    if !(fraction > 0.0 && fraction <= 1.0) {
        return bad(format!("popular_fraction {fraction} outside (0, 1]"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return bad(format!("popular_mass {mass} outside (0, 1]"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return bad(format!("decay {decay} outside (0, 1]"));
    }
    if !(0.0..1.0).contains(&zero) {
        return bad(format!("zero_tail_fraction {zero} outside [0, 1)"));
    }
    let popular = ((count as f64 * fraction).round() as usize).clamp(1, count);
    let zeros = ((count as f64 * zero).round() as usize).min(count - popular);
    let rest = count - popular - zeros;
    if rest == 0 && mass < 1.0 {
        return bad("no bins left for the remaining mass".into());
    }
    let segment = |n: usize, m: f64| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|i| decay.powi(i as i32)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w * m / total).collect()
    };
    let mut w = segment(popular, mass);
    let tail = segment(rest, 1.0 - mass);
    if let (Some(&last), Some(&first)) = (w.last(), tail.first()) {
        if first > last {
            return bad("parameters make the tail more popular than the head".into());
        }
    }
    w.extend(tail);
    w.extend(std::iter::repeat_n(0.0, zeros));
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: Option<PolicyKind>,
    pub buffer_stack: Option<StackId>,
    #[serde(default = "default_check_period")]
    pub check_period: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_check_period() -> f64 {
    DEFAULT_CHECK_PERIOD
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotsSection {
    pub count: usize,
}

impl Default for RobotsSection {
    fn default() -> Self {
        Self { count: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrdersSection {
    /// Requests per minute.
    pub request_rate: f64,
    /// Seconds per request at the workstation.
    pub processing_time: f64,
    pub horizon_hours: Option<f64>,
    pub horizon_seconds: Option<f64>,
    pub horizon_requests: Option<u64>,
}

impl Default for OrdersSection {
    fn default() -> Self {
        Self {
            request_rate: 5.0,
            processing_time: 30.0,
            horizon_hours: None,
            horizon_seconds: None,
            horizon_requests: None,
        }
    }
}

impl OrdersSection {
    pub fn horizon(&self) -> Result<Horizon> {
        match (self.horizon_hours, self.horizon_seconds, self.horizon_requests) {
            (None, None, None) => Ok(Horizon::Seconds(10.0 * 3600.0)),
            (Some(h), None, None) => Ok(Horizon::Seconds(h * 3600.0)),
            (None, Some(s), None) => Ok(Horizon::Seconds(s)),
            (None, None, Some(n)) => Ok(Horizon::Requests(n)),
            _ => Err(Error::Validation(
                "orders: give at most one of horizon_hours, horizon_seconds, horizon_requests"
                    .into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub seeds: Vec<u64>,
    /// Percent of bins swapped away from the optimal configuration.
    pub randomization: u32,
    pub snapshot_cadence: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            randomization: 0,
            snapshot_cadence: 0,
        }
    }
}

/// Grid of runs for `rcs batch`; missing lists mean "as configured".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchSection {
    pub policies: Vec<PolicyKind>,
    pub randomizations: Vec<u32>,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            policies: PolicyKind::ALL.to_vec(),
            randomizations: vec![0, 40, 100],
        }
    }
}

/// One entry of a batch grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub policy: PolicyKind,
    pub randomization: u32,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn policy(&self) -> Result<(&PolicySection, PolicyKind)> {
        let section = self
            .policy
            .as_ref()
            .ok_or_else(|| Error::Validation("policy required".into()))?;
        let kind = section
            .kind
            .ok_or_else(|| Error::Validation("policy required".into()))?;
        Ok((section, kind))
    }

    /// Full validation: builds every scenario the file describes.
    pub fn validate(&self) -> Result<()> {
        self.policy()?;
        if self.simulation.seeds.is_empty() {
            return Err(Error::Validation("simulation: at least one seed is required".into()));
        }
        for key in self.run_keys()? {
            self.scenario(key)?.validate()?;
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<BinCatalog> {
        self.popularity.catalog(self.bins.count)
    }

    /// The empty level the configuration resolves to for `policy`.
    pub fn empty_level(&self, policy: PolicyKind, catalog: &BinCatalog) -> Result<usize> {
        let g = &self.grid;
        match g.empty_level {
            EmptyLevel::Fixed(h) => Ok(h),
            EmptyLevel::Named(EmptyLevelName::Optimal) => {
                let spec = self.grid_spec(0, None)?;
                let lo = usize::from(policy == PolicyKind::LayerComplete);
                let hi = spec.max_empty_level().min(g.height - 1);
                if lo > hi {
                    return Err(Error::Validation(format!(
                        "grid: no admissible empty level for {policy}"
                    )));
                }
                let table = CostTable::build(g.height)?;
                Ok(optimal_empty_level_in(&spec, catalog, &table, lo..=hi)?.best)
            }
        }
    }

    fn grid_spec(&self, empty_level: usize, buffer: Option<StackId>) -> Result<GridSpec> {
        let g = &self.grid;
        if empty_level >= g.height {
            return Err(Error::Validation(format!(
                "grid: empty level {empty_level} leaves no room below height {}",
                g.height
            )));
        }
        Ok(GridSpec {
            rows: g.rows,
            cols: g.cols,
            height: g.height,
            reserve_fraction: g.reserve_fraction,
            fill_level: g.height - empty_level,
            cell_length: g.cell_length,
            cell_width: g.cell_width,
            bin_height: g.bin_height,
            workstations: g.workstations.iter().map(|&[r, c]| Coord::new(r, c)).collect(),
            buffer_stack: buffer,
        })
    }

    /// Every (policy, randomization, seed) combination the batch grid names,
    /// in sorted order.
    pub fn run_keys(&self) -> Result<Vec<RunKey>> {
        let (_, kind) = self.policy()?;
        let (policies, pcts) = match &self.batch {
            Some(b) => (b.policies.clone(), b.randomizations.clone()),
            None => (vec![kind], vec![self.simulation.randomization]),
        };
        let mut keys = Vec::new();
        for &policy in &policies {
            for &randomization in &pcts {
                for &seed in &self.simulation.seeds {
                    keys.push(RunKey {
                        policy,
                        randomization,
                        seed,
                    });
                }
            }
        }
        keys.sort();
        keys.dedup();
        Ok(keys)
    }

    /// The scenario for one run. Baselines drop the buffer stack.
    pub fn scenario(&self, key: RunKey) -> Result<Scenario> {
        let (section, _) = self.policy()?;
        let catalog = self.catalog()?;
        let empty_level = self.empty_level(key.policy, &catalog)?;
        // dummy zero-popularity bins fill the last occupied stack
        let catalog = pad_with_empty_bins(self.grid.height.saturating_sub(empty_level).max(1), &catalog);
        let buffer = match key.policy {
            PolicyKind::LayerComplete => section.buffer_stack,
            _ => None,
        };
        Ok(Scenario {
            spec: self.grid_spec(empty_level, buffer)?,
            catalog,
            policy: key.policy,
            epsilon: section.epsilon,
            check_period: section.check_period,
            robots: self.robots.count,
            request_rate: self.orders.request_rate,
            processing_time: self.orders.processing_time,
            horizon: self.orders.horizon()?,
            seed: key.seed,
            randomization: key.randomization,
            kinematics: self.kinematics,
            snapshot_cadence: self.simulation.snapshot_cadence,
            initial: None,
        })
    }

    /// The first scenario of the configuration.
    pub fn primary(&self) -> Result<Scenario> {
        let (_, kind) = self.policy()?;
        self.scenario(RunKey {
            policy: kind,
            randomization: self.simulation.randomization,
            seed: self.simulation.seeds[0],
        })
    }
}

/// The desk-scale default configuration as TOML text.
pub const DESK_CONFIG: &str = r#"[grid]
rows = 6
cols = 8
height = 6
reserve_fraction = 0.2
empty_level = 1
workstations = [[0, 3], [5, 4]]

[bins]
count = 230

[popularity]
model = "piecewise"
popular_fraction = 0.2
popular_mass = 0.8
decay = 0.98
zero_tail_fraction = 0.0

[policy]
kind = "layer_complete"
buffer_stack = 46
check_period = 300.0
epsilon = 0.2

[robots]
count = 4

[orders]
request_rate = 5.0
processing_time = 30.0
horizon_hours = 10.0

[simulation]
seeds = [0]
randomization = 40
"#;
