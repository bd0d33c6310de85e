//! Simulation scenarios, initial configurations and request streams.

use rand::distributions::WeightedIndex;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{micros, RobotKinematics};
use crate::model::{BinCatalog, BinId, Bgc, GridSpec};
use crate::policy::{PolicyKind, DEFAULT_CHECK_PERIOD, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Seconds(f64),
    Requests(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: GridSpec,
    pub catalog: BinCatalog,
    pub policy: PolicyKind,
    pub epsilon: f64,
    /// Seconds between buffer-stack checks.
    pub check_period: f64,
    pub robots: usize,
    /// Requests per minute.
    pub request_rate: f64,
    /// Seconds per request at the workstation.
    pub processing_time: f64,
    pub horizon: Horizon,
    pub seed: u64,
    /// Percent of bins involved in swaps away from the optimal configuration.
    pub randomization: u32,
    pub kinematics: RobotKinematics,
    /// Dense grid snapshot every this many inserts; 0 disables.
    pub snapshot_cadence: usize,
    /// Replaces the randomized optimal configuration when set.
    pub initial: Option<Bgc>,
}

impl Scenario {
    /// The desk-scale default: 8 x 6 footprint, 6 high, 230 bins, 4 robots.
    pub fn desk(policy: PolicyKind, catalog: BinCatalog) -> Self {
        use crate::model::Coord;
        let buffer = (policy == PolicyKind::LayerComplete).then_some(46);
        Self {
            spec: GridSpec {
                rows: 6,
                cols: 8,
                height: 6,
                reserve_fraction: 0.2,
                fill_level: 5,
                cell_length: 0.65,
                cell_width: 0.45,
                bin_height: 0.33,
                workstations: vec![Coord::new(0, 3), Coord::new(5, 4)],
                buffer_stack: buffer,
            },
            catalog,
            policy,
            epsilon: DEFAULT_EPSILON,
            check_period: DEFAULT_CHECK_PERIOD,
            robots: 4,
            request_rate: 5.0,
            processing_time: 30.0,
            horizon: Horizon::Seconds(10.0 * 3600.0),
            seed: 0,
            randomization: 0,
            kinematics: RobotKinematics::default(),
            snapshot_cadence: 0,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate(self.catalog.len())?;
        self.policy.check_buffer(self.spec.buffer_stack)?;
        self.kinematics.validate()?;
        if self.robots == 0 {
            return Err(Error::Validation("at least one robot is required".into()));
        }
        if !(self.request_rate.is_finite() && self.request_rate > 0.0) {
            return Err(Error::Validation("request rate must be positive".into()));
        }
        if !(self.processing_time.is_finite() && self.processing_time >= 0.0) {
            return Err(Error::Validation("processing time must be non-negative".into()));
        }
        if !(self.check_period.is_finite() && self.check_period > 0.0) {
            return Err(Error::Validation("check period must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) || self.epsilon == 0.0 {
            return Err(Error::Validation("epsilon must lie in (0, 1]".into()));
        }
        if self.randomization > 100 {
            return Err(Error::Validation(format!(
                "randomization {}% outside 0..=100",
                self.randomization
            )));
        }
        match self.horizon {
            Horizon::Seconds(s) if !(s.is_finite() && s >= 0.0) => {
                return Err(Error::Validation("horizon must be non-negative".into()))
            }
            _ => {}
        }
        // stacks may fill to the top, so the other stacks' temporary cells
        // alone must hold every bin dug from a full stack
        let occupied = self.spec.occupied_stacks(self.catalog.len());
        let deepest = self.spec.height.min(self.catalog.len()) - 1;
        if occupied - 1 < deepest {
            return Err(Error::Validation(format!(
                "{occupied} occupied stacks cannot park the {deepest} bins dug from a full stack; \
                 at least {} are needed",
                deepest + 1
            )));
        }
        if self.policy == PolicyKind::LayerComplete && self.spec.empty_level() == 0 {
            return Err(Error::Validation(
                "layer_complete needs at least one empty layer".into(),
            ));
        }
        Ok(())
    }
}

/// Swaps `floor(percent * N / 200)` disjoint pairs of bins drawn uniformly
/// without replacement.
pub fn randomize_from_optimal<R: Rng + ?Sized>(optimal: &Bgc, percent: u32, rng: &mut R) -> Result<Bgc> {
    if percent > 100 {
        return Err(Error::Validation(format!("randomization {percent}% outside 0..=100")));
    }
    let mut bins: Vec<BinId> = optimal.bins().collect();
    bins.sort_unstable();
    let pairs = percent as usize * bins.len() / 200;
    let mut out = optimal.clone();
    if pairs == 0 {
        return Ok(out);
    }
    let picked = sample(rng, bins.len(), 2 * pairs).into_vec();
    for pair in picked.chunks_exact(2) {
        out.swap_bins(bins[pair[0]], bins[pair[1]]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    /// Arrival time, microseconds.
    pub time: u64,
    pub bin: BinId,
}

/// Poisson arrivals at `rate` per minute with targets drawn i.i.d. by
/// popularity, in arrival order.
pub fn generate_requests<R: Rng + ?Sized>(
    catalog: &BinCatalog,
    rate: f64,
    horizon: Horizon,
    rng: &mut R,
) -> Result<Vec<Request>> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Validation("request rate must be positive".into()));
    }
    let gap = Exp::new(rate / 60.0).map_err(|e| Error::Validation(e.to_string()))?;
    let pick = WeightedIndex::new(catalog.popularities())
        .map_err(|e| Error::Validation(format!("popularity weights: {e}")))?;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        if let Horizon::Requests(n) = horizon {
            if out.len() as u64 >= n {
                break;
            }
        }
        t += gap.sample(rng);
        if let Horizon::Seconds(limit) = horizon {
            if t > limit {
                break;
            }
        }
        let bin = pick.sample(rng) as BinId + 1;
        out.push(Request {
            id: out.len() as u64,
            time: micros(t),
            bin,
        });
    }
    Ok(out)
}
