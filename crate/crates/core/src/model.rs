//! Grid, bin and configuration data model.
//!
//! Conventions used throughout the crate:
//!
//! * Bin IDs are 1-based; `0` marks an empty cell. A smaller ID never has a
//!   lower popularity than a larger one.
//! * Stack IDs are 0-based and row-major over the footprint.
//! * Layers are 1-based with layer 1 the top cell of a stack and layer `H`
//!   the bottom cell.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BinId = u32;
pub type StackId = usize;

/// The empty-cell marker.
pub const EMPTY: BinId = 0;

/// Tolerance on the popularity sum of a normalized catalog.
pub const POPULARITY_SUM_TOLERANCE: f64 = 1e-12;

/// Bin popularities, indexed by bin ID and sorted non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCatalog {
    popularity: Vec<f64>,
}

impl BinCatalog {
    /// Wraps an already normalized, sorted popularity vector.
    pub fn from_sorted(popularity: Vec<f64>) -> Result<Self> {
        if popularity.is_empty() {
            return Err(Error::Validation("catalog has no bins".into()));
        }
        if let Some(p) = popularity.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Validation(format!("invalid popularity {p}")));
        }
        if popularity.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "popularity must be non-increasing in bin ID".into(),
            ));
        }
        let sum: f64 = popularity.iter().sum();
        if (sum - 1.0).abs() > POPULARITY_SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "popularity sums to {sum}, expected 1"
            )));
        }
        Ok(Self { popularity })
    }

    pub fn len(&self) -> usize {
        self.popularity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.popularity.is_empty()
    }

    /// Popularity of `bin`; the empty marker and unknown IDs have zero popularity.
    pub fn popularity(&self, bin: BinId) -> f64 {
        if bin == EMPTY {
            return 0.0;
        }
        self.popularity
            .get(bin as usize - 1)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn popularities(&self) -> &[f64] {
        &self.popularity
    }

    pub fn bin_ids(&self) -> impl Iterator<Item = BinId> {
        1..=self.popularity.len() as BinId
    }
}

/// Normalizes raw weights into a catalog; IDs are reassigned by non-increasing
/// weight with ties kept in input order.
pub fn normalize_catalog(raw_weights: &[f64]) -> Result<BinCatalog> {
    normalize_catalog_with_order(raw_weights).map(|(catalog, _)| catalog)
}

/// As [`normalize_catalog`], also returning the input index of each new bin ID
/// (`order[id - 1]`).
pub fn normalize_catalog_with_order(raw_weights: &[f64]) -> Result<(BinCatalog, Vec<usize>)> {
    if raw_weights.is_empty() {
        return Err(Error::Validation("no weights given".into()));
    }
    if let Some(w) = raw_weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Validation(format!("invalid weight {w}")));
    }
    let total: f64 = raw_weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("all weights are zero".into()));
    }
    let mut order: Vec<usize> = (0..raw_weights.len()).collect();
    // stable: equal weights keep input order
    order.sort_by(|&a, &b| raw_weights[b].total_cmp(&raw_weights[a]));
    let popularity: Vec<f64> = order.iter().map(|&i| raw_weights[i] / total).collect();
    Ok((BinCatalog { popularity }, order))
}

/// Appends zero-popularity bins so that `fill_level` divides the bin count.
pub fn pad_with_empty_bins(fill_level: usize, catalog: &BinCatalog) -> BinCatalog {
    assert!(fill_level > 0, "fill level must be positive");
    let n = catalog.len();
    let occupied = n.div_ceil(fill_level);
    let mut popularity = catalog.popularity.clone();
    popularity.resize(occupied * fill_level, 0.0);
    BinCatalog { popularity }
}

/// A cell on the footprint, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Static description of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Footprint rows (Y direction).
    pub rows: usize,
    /// Footprint columns (X direction).
    pub cols: usize,
    /// Cells per stack.
    pub height: usize,
    /// Fraction of cells set aside for expansion, in `[0, 1)`.
    pub reserve_fraction: f64,
    /// Bins per occupied stack.
    pub fill_level: usize,
    /// Cell extent along X, meters.
    pub cell_length: f64,
    /// Cell extent along Y, meters.
    pub cell_width: f64,
    pub bin_height: f64,
    pub workstations: Vec<Coord>,
    pub buffer_stack: Option<StackId>,
}

impl GridSpec {
    pub fn stack_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn empty_level(&self) -> usize {
        self.height - self.fill_level
    }

    /// `floor(H * (1 - tau))`.
    pub fn min_fill_level(&self) -> usize {
        // the small epsilon absorbs representation error such as 10 * (1 - 0.3)
        ((self.height as f64) * (1.0 - self.reserve_fraction) + 1e-9).floor() as usize
    }

    /// Largest admissible empty level.
    pub fn max_empty_level(&self) -> usize {
        self.height - self.min_fill_level().min(self.height)
    }

    /// Number of occupied stacks for `bin_count` bins at the current fill level.
    pub fn occupied_stacks(&self, bin_count: usize) -> usize {
        bin_count.div_ceil(self.fill_level)
    }

    pub fn coord(&self, stack: StackId) -> Coord {
        Coord::new(stack / self.cols, stack % self.cols)
    }

    pub fn stack_at(&self, coord: Coord) -> Option<StackId> {
        (coord.row < self.rows && coord.col < self.cols).then(|| coord.row * self.cols + coord.col)
    }

    pub fn on_perimeter(&self, c: Coord) -> bool {
        c.row < self.rows
            && c.col < self.cols
            && (c.row == 0 || c.col == 0 || c.row + 1 == self.rows || c.col + 1 == self.cols)
    }

    /// Checks the static invariants against a (padded or unpadded) bin count.
    pub fn validate(&self, bin_count: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad("footprint must have at least one row and column".into());
        }
        if self.height == 0 {
            return bad("stack height must be positive".into());
        }
        if !(0.0..1.0).contains(&self.reserve_fraction) {
            return bad(format!(
                "reserve fraction {} outside [0, 1)",
                self.reserve_fraction
            ));
        }
        if self.fill_level == 0 || self.fill_level > self.height {
            return bad(format!(
                "fill level {} outside 1..={}",
                self.fill_level, self.height
            ));
        }
        if self.fill_level < self.min_fill_level() {
            return bad(format!(
                "fill level {} below minimum {}",
                self.fill_level,
                self.min_fill_level()
            ));
        }
        for (name, v) in [
            ("cell_length", self.cell_length),
            ("cell_width", self.cell_width),
            ("bin_height", self.bin_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        let occupied = self.occupied_stacks(bin_count);
        let capacity = self.stack_count() - usize::from(self.buffer_stack.is_some());
        if occupied > capacity {
            return Err(Error::Capacity(format!(
                "{bin_count} bins need {occupied} stacks at fill level {}, only {capacity} available",
                self.fill_level
            )));
        }
        if let Some(buffer) = self.buffer_stack {
            if buffer >= self.stack_count() {
                return bad(format!("buffer stack {buffer} outside the grid"));
            }
            if buffer < occupied {
                return bad(format!(
                    "buffer stack {buffer} overlaps the occupied stacks 0..{occupied}"
                ));
            }
        }
        if self.workstations.is_empty() {
            return bad("at least one workstation is required".into());
        }
        if let Some(w) = self.workstations.iter().find(|w| !self.on_perimeter(**w)) {
            return bad(format!("workstation {w} is not on the footprint perimeter"));
        }
        Ok(())
    }
}

/// A bin grid configuration.
///
/// Stacks are stored bottom-to-top, so gravity holds by construction. Each
/// stack also owns a temporary cell above it, used only while digging.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bgc {
    height: usize,
    stacks: Vec<Vec<BinId>>,
    temp: Vec<Option<BinId>>,
}

impl Bgc {
    pub fn empty(stack_count: usize, height: usize) -> Self {
        Self {
            height,
            stacks: vec![Vec::with_capacity(height); stack_count],
            temp: vec![None; stack_count],
        }
    }

    /// Builds from stacks listed bottom-to-top.
    pub fn from_stacks(height: usize, stacks: Vec<Vec<BinId>>) -> Result<Self> {
        for (m, s) in stacks.iter().enumerate() {
            if s.len() > height {
                return Err(Error::Validation(format!(
                    "stack {m} holds {} bins, height is {height}",
                    s.len()
                )));
            }
            if s.contains(&EMPTY) {
                return Err(Error::Validation(format!("stack {m} contains an empty marker")));
            }
        }
        let mut bgc = Self {
            height,
            temp: vec![None; stacks.len()],
            stacks,
        };
        bgc.check_unique()?;
        bgc.stacks.iter_mut().for_each(|s| s.reserve(height));
        Ok(bgc)
    }

    /// Builds from an `H x M` matrix, row 0 being layer 1.
    pub fn from_matrix(matrix: &[Vec<BinId>]) -> Result<Self> {
        let height = matrix.len();
        let width = matrix.first().map_or(0, Vec::len);
        if matrix.iter().any(|r| r.len() != width) {
            return Err(Error::Validation("ragged matrix".into()));
        }
        let mut stacks = vec![Vec::new(); width];
        for (m, stack) in stacks.iter_mut().enumerate() {
            let mut seen_bin = false;
            for (l, row) in matrix.iter().enumerate() {
                let b = row[m];
                if b != EMPTY {
                    seen_bin = true;
                } else if seen_bin {
                    return Err(Error::Validation(format!(
                        "empty cell below a bin at layer {}, stack {m}",
                        l + 1
                    )));
                }
            }
            stack.extend(matrix.iter().rev().map(|r| r[m]).filter(|&b| b != EMPTY));
        }
        Self::from_stacks(height, stacks)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for b in self.bins() {
            if !seen.insert(b) {
                return Err(Error::Validation(format!("bin {b} appears more than once")));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stack_count(&self) -> usize {
        self.stacks.len()
    }

    /// Bins of `stack`, bottom-to-top, excluding the temporary cell.
    pub fn stack(&self, stack: StackId) -> &[BinId] {
        &self.stacks[stack]
    }

    pub fn temp(&self, stack: StackId) -> Option<BinId> {
        self.temp[stack]
    }

    /// Bin at `(layer, stack)`, layer 1-based from the top.
    pub fn cell(&self, layer: usize, stack: StackId) -> BinId {
        let s = &self.stacks[stack];
        let depth_from_bottom = self.height - layer;
        s.get(depth_from_bottom).copied().unwrap_or(EMPTY)
    }

    pub fn to_matrix(&self) -> Vec<Vec<BinId>> {
        (1..=self.height)
            .map(|l| (0..self.stacks.len()).map(|m| self.cell(l, m)).collect())
            .collect()
    }

    /// Every bin in the grid, including temporary cells.
    pub fn bins(&self) -> impl Iterator<Item = BinId> + '_ {
        self.stacks
            .iter()
            .flatten()
            .copied()
            .chain(self.temp.iter().flatten().copied())
    }

    pub fn bin_count(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum::<usize>() + self.temp.iter().flatten().count()
    }

    pub fn fill_level(&self, stack: StackId) -> usize {
        self.stacks[stack].len()
    }

    /// `(layer, stack)` of a bin in a normal cell; temporary cells report layer 0.
    pub fn locate(&self, bin: BinId) -> Option<(usize, StackId)> {
        for (m, s) in self.stacks.iter().enumerate() {
            if let Some(i) = s.iter().position(|&b| b == bin) {
                return Some((self.height - i, m));
            }
            if self.temp[m] == Some(bin) {
                return Some((0, m));
            }
        }
        None
    }

    /// Cells still free in `stack`, counting the temporary cell.
    pub fn free_slots(&self, stack: StackId) -> usize {
        self.height - self.stacks[stack].len() + usize::from(self.temp[stack].is_none())
    }

    /// Layer a bin lands in when placed on `stack` (0 = temporary cell).
    pub fn landing_layer(&self, stack: StackId) -> Option<usize> {
        let h = self.stacks[stack].len();
        if h < self.height {
            Some(self.height - h)
        } else if self.temp[stack].is_none() {
            Some(0)
        } else {
            None
        }
    }

    /// Places `bin` on top of `stack`, spilling into the temporary cell when
    /// the stack is full. Returns the landing layer.
    pub fn place(&mut self, stack: StackId, bin: BinId) -> Result<usize> {
        debug_assert_ne!(bin, EMPTY);
        if self.temp[stack].is_some() {
            return Err(Error::Capacity(format!("stack {stack} temporary cell is taken")));
        }
        let h = self.stacks[stack].len();
        if h < self.height {
            self.stacks[stack].push(bin);
            Ok(self.height - h)
        } else {
            self.temp[stack] = Some(bin);
            Ok(0)
        }
    }

    /// Removes the topmost bin (the temporary cell first). Returns the bin and
    /// the layer it was taken from.
    pub fn take_top(&mut self, stack: StackId) -> Option<(BinId, usize)> {
        if let Some(b) = self.temp[stack].take() {
            return Some((b, 0));
        }
        let h = self.stacks[stack].len();
        self.stacks[stack].pop().map(|b| (b, self.height - h + 1))
    }

    pub fn top(&self, stack: StackId) -> Option<BinId> {
        self.temp[stack].or_else(|| self.stacks[stack].last().copied())
    }

    /// Contents of each stack as a set, temporary cells included.
    pub fn stack_sets(&self) -> Vec<Vec<BinId>> {
        self.stacks
            .iter()
            .zip(&self.temp)
            .map(|(s, t)| s.iter().copied().chain(*t).collect())
            .collect()
    }

    /// Exchanges the cells of two bins.
    pub fn swap_bins(&mut self, a: BinId, b: BinId) {
        for cell in self.stacks.iter_mut().flatten() {
            if *cell == a {
                *cell = b;
            } else if *cell == b {
                *cell = a;
            }
        }
    }
}

/// Per-stack bin counts.
pub fn fill_levels(bgc: &Bgc) -> Vec<usize> {
    (0..bgc.stack_count()).map(|m| bgc.fill_level(m)).collect()
}

/// Layer of the topmost bin of `stack`, or `None` for an empty stack.
pub fn surface_layer(bgc: &Bgc, stack: StackId) -> Option<usize> {
    let h = bgc.fill_level(stack);
    (h > 0).then(|| bgc.height() - h + 1)
}

/// One problem found by [`validate_initial_bgc`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Dimensions { expected: (usize, usize), found: (usize, usize) },
    DuplicateId { bin: BinId },
    UnknownId { bin: BinId },
    MissingId { bin: BinId },
    /// A bin sits in a layer at or above the empty level.
    AboveFillRegion { bin: BinId, layer: usize, stack: StackId },
    /// A bin sits in a stack past the occupied block.
    OutsideOccupiedStacks { bin: BinId, stack: StackId },
    /// A cell of the occupied block is empty.
    EmptyCell { layer: usize, stack: StackId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions { expected, found } => write!(
                f,
                "matrix is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::DuplicateId { bin } => write!(f, "duplicate ID {bin}"),
            Violation::UnknownId { bin } => write!(f, "unknown ID {bin}"),
            Violation::MissingId { bin } => write!(f, "missing ID {bin}"),
            Violation::AboveFillRegion { bin, layer, stack } => {
                write!(f, "bin {bin} above fill region at layer {layer}, stack {stack}")
            }
            Violation::OutsideOccupiedStacks { bin, stack } => {
                write!(f, "bin {bin} in unoccupied stack {stack}")
            }
            Violation::EmptyCell { layer, stack } => {
                write!(f, "empty cell at layer {layer}, stack {stack}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `matrix` (row 0 = layer 1) has the feasible block form for
/// `bin_count` bins: the first `m_f` stacks full in layers `h_e+1..=H`, each ID
/// present once, everything else empty.
pub fn validate_initial_bgc(
    spec: &GridSpec,
    bin_count: usize,
    matrix: &[Vec<BinId>],
) -> ValidationReport {
    let mut violations = Vec::new();
    let (h, m) = (spec.height, spec.stack_count());
    let found = (matrix.len(), matrix.first().map_or(0, Vec::len));
    if found != (h, m) || matrix.iter().any(|r| r.len() != m) {
        violations.push(Violation::Dimensions {
            expected: (h, m),
            found,
        });
        return ValidationReport { violations };
    }
    let he = spec.empty_level();
    let occupied = spec.occupied_stacks(bin_count);
    let mut seen = vec![false; bin_count + 1];
    for (li, row) in matrix.iter().enumerate() {
        let layer = li + 1;
        for (stack, &bin) in row.iter().enumerate() {
            let in_block = stack < occupied && layer > he;
            if bin == EMPTY {
                if in_block {
                    violations.push(Violation::EmptyCell { layer, stack });
                }
                continue;
            }
            if bin as usize > bin_count {
                violations.push(Violation::UnknownId { bin });
            } else if std::mem::replace(&mut seen[bin as usize], true) {
                violations.push(Violation::DuplicateId { bin });
            }
            if stack >= occupied {
                violations.push(Violation::OutsideOccupiedStacks { bin, stack });
            } else if layer <= he {
                violations.push(Violation::AboveFillRegion { bin, layer, stack });
            }
        }
    }
    for bin in 1..=bin_count {
        if !seen[bin] {
            violations.push(Violation::MissingId { bin: bin as BinId });
        }
    }
    ValidationReport { violations }
}
