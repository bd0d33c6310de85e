//! Robot motion times.
//!
//! Horizontal travel runs the X leg first, then the Y leg, each with an
//! acceleration-limited profile. The gripper moves at constant lift speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coord, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotKinematics {
    /// m/s
    pub top_speed: f64,
    /// m/s^2
    pub acceleration: f64,
    /// m/s
    pub lift_speed: f64,
    /// s
    pub load: f64,
    /// s
    pub unload: f64,
    /// s
    pub turn: f64,
}

impl Default for RobotKinematics {
    fn default() -> Self {
        Self {
            top_speed: 3.1,
            acceleration: 0.8,
            lift_speed: 1.6,
            load: 1.2,
            unload: 1.0,
            turn: 1.0,
        }
    }
}

impl RobotKinematics {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("top_speed", self.top_speed),
            ("acceleration", self.acceleration),
            ("lift_speed", self.lift_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("load", self.load), ("unload", self.unload), ("turn", self.turn)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Time to cover `distance` meters from rest to rest.
pub fn leg_time(distance: f64, k: &RobotKinematics) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let (v, a) = (k.top_speed, k.acceleration);
    if distance >= v * v / a {
        distance / v + v / a
    } else {
        2.0 * (distance / a).sqrt()
    }
}

/// Seconds to drive from `from` to `to`.
pub fn travel_time(from: Coord, to: Coord, spec: &GridSpec, k: &RobotKinematics) -> f64 {
    let dx = from.col.abs_diff(to.col) as f64 * spec.cell_length;
    let dy = from.row.abs_diff(to.row) as f64 * spec.cell_width;
    let turn = if dx > 0.0 && dy > 0.0 { k.turn } else { 0.0 };
    leg_time(dx, k) + leg_time(dy, k) + turn
}

/// Seconds of gripper motion over `cells` cell heights, without handling.
pub fn gripper_time(cells: usize, bin_height: f64, k: &RobotKinematics) -> f64 {
    cells as f64 * bin_height / k.lift_speed
}

/// Gripper seconds to pick a bin at `layer` (down and back up, then load).
pub fn pick_time(layer: usize, bin_height: f64, k: &RobotKinematics) -> f64 {
    gripper_time(2 * layer, bin_height, k) + k.load
}

/// Gripper seconds to drop a bin at `layer`.
pub fn place_time(layer: usize, bin_height: f64, k: &RobotKinematics) -> f64 {
    gripper_time(2 * layer, bin_height, k) + k.unload
}

/// Seconds to whole microseconds.
pub fn micros(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}

pub fn seconds(micros: u64) -> f64 {
    micros as f64 / 1e6
}
