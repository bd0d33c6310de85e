//! Slotting theory, rearrangement policies and a discrete-event simulator for
//! robotic compact storage grids, where bins are stacked in columns and robots
//! on top of the grid dig out the bin they need.

pub mod batch;
pub mod config;
pub mod cost;
pub mod error;
pub mod kinematics;
pub mod matching;
pub mod model;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
