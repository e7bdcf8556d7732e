//! Warehouse layout model and path-cost estimators.
//!
//! Shelves are axis-aligned rectangles on a regular lattice. In the
//! canonical frame (`Orientation::XAxis`) each shelf is `shelf_length` cells
//! long along x and `shelf_depth` cells deep along y. Shelf *columns* are
//! separated by vertical gaps of `gap_w` cells, shelf *rows* by horizontal
//! corridors of `gap_h` cells. The outermost ring of the grid is always
//! aisle, so every aisle cell is connected to every other.
//!
//! For `Orientation::YAxis` the same lattice is transposed: every estimator
//! maps points into the canonical frame by swapping x and y.
//!
//! Band membership uses half-open intervals: shelf column `c` covers
//! `[start_c, start_c + shelf_length)` along the shelf axis, and shelf row
//! `r` covers `[start_r, start_r + shelf_depth)` across it.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::GridPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Shelves run along the x axis.
    XAxis,
    /// Shelves run along the y axis.
    YAxis,
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "x_axis" | "x-axis" => Ok(Orientation::XAxis),
            "y" | "y_axis" | "y-axis" => Ok(Orientation::YAxis),
            other => Err(format!("unknown orientation `{other}` (expected x or y)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("grid must be at least 3x3, got {0}x{1}")]
    TooSmall(i32, i32),
    #[error("shelf length, depth and gaps must all be at least 1")]
    DegenerateShelf,
    #[error("shelf origin {0} must leave at least one aisle cell before the first shelf")]
    OriginOnBoundary(GridPoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("{0} lies inside a shelf")]
    ShelfCell(GridPoint),
    #[error("{0} lies outside the grid")]
    OutOfBounds(GridPoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WarehouseLayout {
    pub width: i32,
    pub height: i32,
    /// Shelf extent along the shelf axis.
    pub shelf_length: i32,
    /// Shelf extent across the shelf axis.
    #[serde(default = "default_depth")]
    pub shelf_depth: i32,
    /// Aisle width between neighbouring shelf columns.
    pub gap_w: i32,
    /// Corridor height between neighbouring shelf rows.
    pub gap_h: i32,
    /// Top-left cell of the first shelf.
    pub origin: GridPoint,
    pub orientation: Orientation,
}

fn default_depth() -> i32 {
    1
}

impl WarehouseLayout {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: i32,
        height: i32,
        shelf_length: i32,
        shelf_depth: i32,
        gap_w: i32,
        gap_h: i32,
        origin: GridPoint,
        orientation: Orientation,
    ) -> Self {
        Self { width, height, shelf_length, shelf_depth, gap_w, gap_h, origin, orientation }
    }

    /// A grid with no shelves at all.
    pub fn open(width: i32, height: i32) -> Self {
        // Origin past the far edge: no shelf fits.
        Self::new(width, height, 1, 1, 1, 1, GridPoint::new(width, height), Orientation::XAxis)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.width < 3 || self.height < 3 {
            return Err(LayoutError::TooSmall(self.width, self.height));
        }
        if self.shelf_length < 1 || self.shelf_depth < 1 || self.gap_w < 1 || self.gap_h < 1 {
            return Err(LayoutError::DegenerateShelf);
        }
        if self.origin.x < 1 || self.origin.y < 1 {
            return Err(LayoutError::OriginOnBoundary(self.origin));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn in_bounds(&self, p: GridPoint) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn is_shelf(&self, p: GridPoint) -> bool {
        if !self.in_bounds(p) {
            return false;
        }
        let (u, v) = self.canon(p);
        self.col_band(u).is_some() && self.row_band(v).is_some()
    }

    pub fn is_aisle(&self, p: GridPoint) -> bool {
        self.in_bounds(p) && !self.is_shelf(p)
    }

    pub fn cell_count(&self) -> usize {
        (self.width.max(0) * self.height.max(0)) as usize
    }

    pub fn index(&self, p: GridPoint) -> usize {
        (p.y * self.width + p.x) as usize
    }

    pub fn point(&self, index: usize) -> GridPoint {
        let i = index as i32;
        GridPoint::new(i % self.width, i / self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| GridPoint::new(x, y)))
    }

    pub fn aisle_cells(&self) -> Vec<GridPoint> {
        self.cells().filter(|p| self.is_aisle(*p)).collect()
    }

    /// Aisle cells touching a shelf: candidate pickup points.
    pub fn pickup_cells(&self) -> Vec<GridPoint> {
        self.cells()
            .filter(|p| self.is_aisle(*p) && p.neighbours().iter().any(|n| self.is_shelf(*n)))
            .collect()
    }

    /// The two side lines at either end of the shelf axis: candidate
    /// delivery points.
    pub fn delivery_cells(&self) -> Vec<GridPoint> {
        let last = self.extent_u() - 1;
        self.cells()
            .filter(|p| {
                let (u, _) = self.canon(*p);
                u == 0 || u == last
            })
            .collect()
    }

    /// Blocked-cell raster, row-major.
    pub fn raster(&self) -> Vec<bool> {
        self.cells().map(|p| self.is_shelf(p)).collect()
    }

    pub fn shelf_columns(&self) -> i32 {
        let period = self.shelf_length + self.gap_w;
        let room = self.extent_u() - 1 - self.origin_u() - self.shelf_length;
        if room < 0 || period <= 0 {
            0
        } else {
            room / period + 1
        }
    }

    pub fn shelf_rows(&self) -> i32 {
        let period = self.shelf_depth + self.gap_h;
        let room = self.extent_v() - 1 - self.origin_v() - self.shelf_depth;
        if room < 0 || period <= 0 {
            0
        } else {
            room / period + 1
        }
    }

    // Canonical-frame helpers: u runs along the shelves, v across them.

    fn canon(&self, p: GridPoint) -> (i32, i32) {
        match self.orientation {
            Orientation::XAxis => (p.x, p.y),
            Orientation::YAxis => (p.y, p.x),
        }
    }

    fn extent_u(&self) -> i32 {
        match self.orientation {
            Orientation::XAxis => self.width,
            Orientation::YAxis => self.height,
        }
    }

    fn extent_v(&self) -> i32 {
        match self.orientation {
            Orientation::XAxis => self.height,
            Orientation::YAxis => self.width,
        }
    }

    fn origin_u(&self) -> i32 {
        self.canon(self.origin).0
    }

    fn origin_v(&self) -> i32 {
        self.canon(self.origin).1
    }

    fn col_start(&self, c: i32) -> i32 {
        self.origin_u() + c * (self.shelf_length + self.gap_w)
    }

    fn row_start(&self, r: i32) -> i32 {
        self.origin_v() + r * (self.shelf_depth + self.gap_h)
    }

    fn col_band(&self, u: i32) -> Option<i32> {
        band(u, self.origin_u(), self.shelf_length, self.gap_w, self.shelf_columns())
    }

    fn row_band(&self, v: i32) -> Option<i32> {
        band(v, self.origin_v(), self.shelf_depth, self.gap_h, self.shelf_rows())
    }

    /// Number of shelf rows lying entirely before `v`.
    fn rows_before(&self, v: i32) -> i32 {
        let rows = self.shelf_rows();
        if v < self.origin_v() {
            return 0;
        }
        let period = self.shelf_depth + self.gap_h;
        let k = (v - self.origin_v()) / period;
        let off = (v - self.origin_v()) % period;
        let passed = if off >= self.shelf_depth { k + 1 } else { k };
        passed.min(rows)
    }

    /// True when some shelf column lies strictly between `u1` and `u2`.
    fn column_between(&self, u1: i32, u2: i32) -> bool {
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        (0..self.shelf_columns()).any(|c| {
            let s = self.col_start(c);
            s > lo && s + self.shelf_length - 1 < hi
        })
    }
}

fn band(coord: i32, origin: i32, len: i32, gap: i32, count: i32) -> Option<i32> {
    if coord < origin || count == 0 {
        return None;
    }
    let period = len + gap;
    let k = (coord - origin) / period;
    if k >= count {
        return None;
    }
    ((coord - origin) % period < len).then_some(k)
}

pub fn manhattan_cost(a: GridPoint, b: GridPoint) -> f64 {
    ((a.x - b.x).abs() + (a.y - b.y).abs()) as f64
}

pub fn euclidean_cost(a: GridPoint, b: GridPoint) -> f64 {
    let dx = (a.x - b.x) as f64;
    let dy = (a.y - b.y) as f64;
    dx.hypot(dy)
}

/// Shelf-aware path length between two aisle cells.
///
/// Points that share a corridor, sit in different shelf columns, or lie in a
/// vertical gap are joined by a rectangular path, so the rectilinear distance
/// applies. Two points in the same shelf column but different corridors must
/// detour through one of the two vertical gaps bounding that column; the
/// cost is the vertical offset plus the cheaper of the two horizontal
/// detours. The transposed case (two gap points inside one shelf row with a
/// shelf column between them) detours through the corridor above or below.
pub fn warehouse_cost(a: GridPoint, b: GridPoint, layout: &WarehouseLayout) -> Result<u32, GeometryError> {
    for p in [a, b] {
        if !layout.in_bounds(p) {
            return Err(GeometryError::OutOfBounds(p));
        }
        if layout.is_shelf(p) {
            return Err(GeometryError::ShelfCell(p));
        }
    }
    let (au, av) = layout.canon(a);
    let (bu, bv) = layout.canon(b);
    let du = (au - bu).abs();
    let dv = (av - bv).abs();
    let manhattan = (du + dv) as u32;

    let col_a = layout.col_band(au);
    let col_b = layout.col_band(bu);

    if col_a.is_none() || col_b.is_none() {
        // At least one point is in a vertical gap. The only obstruction left
        // is both points inside the same shelf row with a shelf between them.
        if let (Some(ra), Some(rb)) = (layout.row_band(av), layout.row_band(bv)) {
            if ra == rb && layout.column_between(au, bu) {
                let above = layout.row_start(ra) - 1;
                let below = layout.row_start(ra) + layout.shelf_depth;
                let detour = [above, below]
                    .iter()
                    .map(|e| (av - e).abs() + (bv - e).abs())
                    .min()
                    .unwrap_or(0);
                return Ok((du + detour) as u32);
            }
        }
        return Ok(manhattan);
    }

    if du > layout.shelf_length {
        return Ok(manhattan);
    }
    // Both points are in shelf columns, hence in corridors.
    if layout.rows_before(av) == layout.rows_before(bv) {
        return Ok(manhattan);
    }
    let (ca, cb) = (col_a.unwrap_or(0), col_b.unwrap_or(0));
    if ca != cb {
        return Ok(manhattan);
    }
    let left = layout.col_start(ca) - 1;
    let right = layout.col_start(ca) + layout.shelf_length;
    let detour = [left, right]
        .iter()
        .map(|g| (g - au).abs() + (g - bu).abs())
        .min()
        .unwrap_or(0);
    Ok((dv + detour) as u32)
}

/// Exact shortest 4-connected aisle path length, or `None` if `b` cannot be
/// reached from `a`.
pub fn bfs_oracle(a: GridPoint, b: GridPoint, layout: &WarehouseLayout) -> Option<u32> {
    if !layout.is_aisle(a) || !layout.is_aisle(b) {
        return None;
    }
    if a == b {
        return Some(0);
    }
    bfs_distances(a, layout)[layout.index(b)]
}

/// Distances from `from` to every cell; shelf and unreachable cells are
/// `None`.
pub fn bfs_distances(from: GridPoint, layout: &WarehouseLayout) -> Vec<Option<u32>> {
    let blocked = layout.raster();
    bfs_on_raster(from, layout, &blocked)
}

pub(crate) fn bfs_on_raster(from: GridPoint, layout: &WarehouseLayout, blocked: &[bool]) -> Vec<Option<u32>> {
    let mut dist = vec![None; layout.cell_count()];
    if !layout.in_bounds(from) || blocked[layout.index(from)] {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[layout.index(from)] = Some(0);
    queue.push_back(from);
    while let Some(p) = queue.pop_front() {
        let d = dist[layout.index(p)].unwrap_or(0);
        for n in p.neighbours() {
            if layout.in_bounds(n) {
                let i = layout.index(n);
                if !blocked[i] && dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

/// Nearest aisle cell to `p` (which may lie inside a shelf or off-grid).
/// Ties go to the lowest `(x, y)`.
pub fn snap_to_aisle(p: GridPoint, layout: &WarehouseLayout) -> GridPoint {
    let clamped = GridPoint::new(p.x.clamp(0, layout.width - 1), p.y.clamp(0, layout.height - 1));
    if layout.is_aisle(clamped) && clamped == p {
        return p;
    }
    let max_r = layout.width + layout.height;
    for r in 0..=max_r {
        let mut best: Option<GridPoint> = None;
        for dx in -r..=r {
            let rest = r - dx.abs();
            for dy in [-rest, rest] {
                let q = GridPoint::new(p.x + dx, p.y + dy);
                if layout.is_aisle(q) && best.is_none_or(|b| (q.x, q.y) < (b.x, b.y)) {
                    best = Some(q);
                }
            }
        }
        if let Some(b) = best {
            return b;
        }
    }
    clamped
}

/// Which distance function the allocator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Warehouse,
    Euclidean,
    Manhattan,
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "warehouse" => Ok(Estimator::Warehouse),
            "euclidean" => Ok(Estimator::Euclidean),
            "manhattan" => Ok(Estimator::Manhattan),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Warehouse => "warehouse",
            Estimator::Euclidean => "euclidean",
            Estimator::Manhattan => "manhattan",
        })
    }
}

/// An estimator bound to a layout.
///
/// When the layout fails its regularity checks the warehouse estimator
/// falls back to the rectilinear distance and `fallback` is set.
#[derive(Debug, Clone)]
pub struct CostModel {
    estimator: Estimator,
    layout: WarehouseLayout,
    fallback: bool,
}

impl CostModel {
    pub fn new(estimator: Estimator, layout: WarehouseLayout) -> Self {
        let fallback = estimator == Estimator::Warehouse && !layout.is_valid();
        Self { estimator, layout, fallback }
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn layout(&self) -> &WarehouseLayout {
        &self.layout
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn cost(&self, a: GridPoint, b: GridPoint) -> f64 {
        match self.estimator {
            Estimator::Euclidean => euclidean_cost(a, b),
            Estimator::Manhattan => manhattan_cost(a, b),
            Estimator::Warehouse if self.fallback => manhattan_cost(a, b),
            Estimator::Warehouse => match warehouse_cost(a, b, &self.layout) {
                Ok(d) => d as f64,
                Err(_) => manhattan_cost(a, b),
            },
        }
    }
}
