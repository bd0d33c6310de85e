//! Gripper-motion retrieval cost in unit cell moves.
//!
//! Moving the gripper between the grid top and layer `l` costs `l`. Retrieving
//! a bin at layer `l` from a stack whose empty level is `h_e` costs the dig in
//! the target stack plus the cost of parking every dug-up bin on the nearest
//! neighbor stacks, each filled bottom-to-top including its temporary cell.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{BinCatalog, BinId, Bgc};

/// Cost of lifting every bin from the surface layer `h_e + 1` down to and
/// including the target at `layer`: `l^2 + l - h_e^2 - h_e`.
pub fn dig_cost_in_stack(layer: usize, empty_level: usize) -> Result<u64> {
    if layer <= empty_level {
        return Err(Error::Domain(format!(
            "target layer {layer} is not below empty level {empty_level}"
        )));
    }
    let (l, e) = (layer as u64, empty_level as u64);
    Ok(l * l + l - e * e - e)
}

/// Lookup table of placement costs, rows `h_e` in `0..H`, columns `l` in `1..=2H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    height: usize,
    max_layer: usize,
    // rows[h_e][l - 1]; None where l <= h_e
    rows: Vec<Vec<Option<u64>>>,
}

impl CostTable {
    /// Builds the table for stacks of height `height`.
    ///
    /// Each entry sums the first `l - h_e - 1` terms of the cyclic sequence
    /// `2h_e, 2(h_e - 1), ..., 0, 2h_e, ...`.
    pub fn build(height: usize) -> Result<Self> {
        if height == 0 {
            return Err(Error::Domain("height must be positive".into()));
        }
        let max_layer = 2 * height;
        let rows = (0..height)
            .map(|he| {
                let cycle: Vec<u64> = (0..=he).rev().map(|k| 2 * k as u64).collect();
                let mut row = vec![None; max_layer];
                let mut acc = 0;
                for l in he + 1..=max_layer {
                    let dug = l - he - 1;
                    if dug > 0 {
                        acc += cycle[(dug - 1) % cycle.len()];
                    }
                    row[l - 1] = Some(acc);
                }
                row
            })
            .collect();
        Ok(Self {
            height,
            max_layer,
            rows,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_layer(&self) -> usize {
        self.max_layer
    }

    /// `T(h_e, l)`, or `None` when undefined.
    pub fn get(&self, empty_level: usize, layer: usize) -> Option<u64> {
        if layer == 0 {
            return None;
        }
        self.rows.get(empty_level)?.get(layer - 1).copied().flatten()
    }

    /// Renders rows `0..H` and columns `1..=max_layer` as CSV, `-` marking
    /// undefined entries.
    pub fn to_csv(&self, max_layer: usize) -> String {
        let max_layer = max_layer.min(self.max_layer);
        let mut out = String::from("h_e");
        for l in 1..=max_layer {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for he in 0..self.height {
            let _ = write!(out, "{he}");
            for l in 1..=max_layer {
                match self.get(he, l) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Cost of parking the bins above a target at `layer` on neighbor stacks.
pub fn placement_cost(layer: usize, empty_level: usize, table: &CostTable) -> Result<u64> {
    table.get(empty_level, layer).ok_or_else(|| {
        Error::Domain(format!(
            "no placement cost for layer {layer} at empty level {empty_level}"
        ))
    })
}

/// Total gripper cost of retrieving a bin at `layer`.
pub fn retrieval_cost(layer: usize, empty_level: usize, table: &CostTable) -> Result<u64> {
    Ok(dig_cost_in_stack(layer, empty_level)? + placement_cost(layer, empty_level, table)?)
}

/// Probability mass per layer; index `l - 1` holds layer `l`.
pub fn layer_probabilities(bgc: &Bgc, catalog: &BinCatalog) -> Vec<f64> {
    (1..=bgc.height())
        .map(|l| {
            (0..bgc.stack_count())
                .map(|m| catalog.popularity(bgc.cell(l, m)))
                .sum()
        })
        .collect()
}

/// The common fill level of all non-empty stacks.
pub fn uniform_fill_level(bgc: &Bgc) -> Result<usize> {
    let mut level = None;
    for m in 0..bgc.stack_count() {
        let h = bgc.fill_level(m);
        if h == 0 {
            continue;
        }
        match level {
            None => level = Some(h),
            Some(x) if x != h => {
                return Err(Error::Domain(format!(
                    "stacks have differing fill levels {x} and {h}"
                )))
            }
            _ => {}
        }
    }
    level.ok_or_else(|| Error::Domain("configuration holds no bins".into()))
}

/// Expected single-request retrieval cost of `bgc`.
pub fn expected_cost(bgc: &Bgc, catalog: &BinCatalog, table: &CostTable) -> Result<f64> {
    let he = bgc.height() - uniform_fill_level(bgc)?;
    let pi = layer_probabilities(bgc, catalog);
    let mut total = 0.0;
    for (i, &mass) in pi.iter().enumerate().skip(he) {
        total += retrieval_cost(i + 1, he, table)? as f64 * mass;
    }
    Ok(total)
}

/// Expected cost with integer weights instead of probabilities, summed per
/// layer. Useful where exact comparison matters.
pub fn weighted_cost(
    bgc: &Bgc,
    weight: impl Fn(BinId) -> u64,
    table: &CostTable,
) -> Result<u128> {
    let he = bgc.height() - uniform_fill_level(bgc)?;
    let mut total = 0u128;
    for l in he + 1..=bgc.height() {
        let mass: u128 = (0..bgc.stack_count())
            .map(|m| bgc.cell(l, m))
            .filter(|&b| b != 0)
            .map(|b| weight(b) as u128)
            .sum();
        total += retrieval_cost(l, he, table)? as u128 * mass;
    }
    Ok(total)
}
