//! Geometric room segmentation of an occupancy grid's free space.
//!
//! Both algorithms follow the same shape: find compact "seed" regions whose
//! area falls inside a configured band, then hand every remaining free cell to
//! the nearest seed with a simultaneous wavefront. They differ only in how the
//! candidate regions are produced:
//!
//! * [`segment_morphological`] repeatedly erodes the free mask (4-connected
//!   structuring element) and looks at the 8-connected components left after
//!   each erosion.
//! * [`segment_distance`] thresholds the exact Euclidean distance transform of
//!   free space, sweeping the threshold down one cell at a time.
//!
//! A candidate becomes a seed the first time it satisfies the band, i.e. only
//! if it contains no cell of an earlier seed. Free components that no seed
//! reaches are kept as rooms of their own, so every free cell is labeled.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{CellCoord, LabelMap, OccupancyGrid, RoomId};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("map has no free cells")]
    EmptyMap,
    #[error("no region matched the room area band")]
    NoRoomsFound,
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Morphological,
    Distance,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "morphological" | "morph" => Ok(Algorithm::Morphological),
            "distance" => Ok(Algorithm::Distance),
            other => Err(format!("unknown segmentation algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub algorithm: Algorithm,
    /// m²
    pub min_room_area: f64,
    /// m²
    pub max_room_area: f64,
    /// Erosions per iteration, in cells.
    pub erosion_step: usize,
    pub max_iterations: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Morphological,
            min_room_area: 1.0,
            max_room_area: 60.0,
            erosion_step: 1,
            max_iterations: 100,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.min_room_area > 0.0 && self.min_room_area < self.max_room_area) {
            return Err(SegmentationError::InvalidParams(format!(
                "need 0 < min_room_area < max_room_area, got {} and {}",
                self.min_room_area, self.max_room_area
            )));
        }
        if self.erosion_step == 0 || self.max_iterations == 0 {
            return Err(SegmentationError::InvalidParams(
                "erosion_step and max_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn in_band(&self, cells: usize, cell_area: f64) -> bool {
        let area = cells as f64 * cell_area;
        area >= self.min_room_area && area <= self.max_room_area
    }
}

/// Runs whichever algorithm `params` selects.
pub fn segment(grid: &OccupancyGrid, params: &SegmentationParams) -> Result<LabelMap, SegmentationError> {
    match params.algorithm {
        Algorithm::Morphological => segment_morphological(grid, params),
        Algorithm::Distance => segment_distance(grid, params),
    }
}

pub fn segment_morphological(
    grid: &OccupancyGrid,
    params: &SegmentationParams,
) -> Result<LabelMap, SegmentationError> {
    params.validate()?;
    let free = free_mask(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let mut seeds = SeedSet::new(w * h);
    let mut mask = free.clone();
    for _ in 0..params.max_iterations {
        for _ in 0..params.erosion_step {
            mask = erode4(&mask, w, h);
        }
        if !mask.iter().any(|&m| m) {
            break;
        }
        for component in components8(&mask, w, h) {
            if params.in_band(component.len(), grid.cell_area()) {
                seeds.offer(&component);
            }
        }
    }
    seeds.finish(&free, w, h)
}

pub fn segment_distance(
    grid: &OccupancyGrid,
    params: &SegmentationParams,
) -> Result<LabelMap, SegmentationError> {
    params.validate()?;
    let free = free_mask(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let dist = distance_transform(&free, w, h);
    let max = dist.iter().cloned().fold(0.0f64, f64::max);
    let mut seeds = SeedSet::new(w * h);
    let mut threshold = max;
    while threshold > 0.0 {
        let level: Vec<bool> = dist.iter().map(|&d| d >= threshold).collect();
        for component in components8(&level, w, h) {
            if params.in_band(component.len(), grid.cell_area()) {
                seeds.offer(&component);
            }
        }
        threshold -= 1.0;
    }
    seeds.finish(&free, w, h)
}

fn free_mask(grid: &OccupancyGrid) -> Result<Vec<bool>, SegmentationError> {
    let mask: Vec<bool> = grid.cells().iter().map(|c| *c == crate::gridmap::CellState::Free).collect();
    if !mask.iter().any(|&m| m) {
        return Err(SegmentationError::EmptyMap);
    }
    Ok(mask)
}

/// Seeds collected so far, as a label per cell.
struct SeedSet {
    labels: Vec<u32>,
    count: u32,
}

impl SeedSet {
    fn new(len: usize) -> Self {
        Self { labels: vec![0; len], count: 0 }
    }

    /// Accepts `cells` as a new seed unless it overlaps an existing one.
    fn offer(&mut self, cells: &[usize]) {
        if cells.iter().any(|&i| self.labels[i] != 0) {
            return;
        }
        self.count += 1;
        for &i in cells {
            self.labels[i] = self.count;
        }
    }

    fn finish(mut self, free: &[bool], w: usize, h: usize) -> Result<LabelMap, SegmentationError> {
        if self.count == 0 {
            return Err(SegmentationError::NoRoomsFound);
        }
        wavefront(&mut self.labels, free, w, h);
        let unreached: Vec<bool> = free
            .iter()
            .zip(&self.labels)
            .map(|(&f, &l)| f && l == 0)
            .collect();
        for component in components8(&unreached, w, h) {
            self.count += 1;
            for i in component {
                self.labels[i] = self.count;
            }
        }
        Ok(LabelMap::new(w, h, self.labels).expect("seed ids are dense"))
    }
}

fn neighbors8(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % w) as i64, (i / w) as i64);
    (-1i64..=1)
        .flat_map(move |dy| (-1i64..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64).then(|| ny as usize * w + nx as usize)
        })
}

/// A cell survives iff it and its four edge neighbours are set. Cells off the
/// grid count as unset.
pub(crate) fn erode4(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            out[i] = mask[i]
                && x > 0
                && y > 0
                && x + 1 < w
                && y + 1 < h
                && mask[i - 1]
                && mask[i + 1]
                && mask[i - w]
                && mask[i + w];
        }
    }
    out
}

/// 8-connected components of `mask`, ordered by their first cell in
/// row-major order. Each component lists cell indices in BFS order.
pub(crate) fn components8(mask: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut component = Vec::new();
        while let Some(i) = queue.pop_front() {
            component.push(i);
            for n in neighbors8(i, w, h) {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        out.push(component);
    }
    out
}

/// Level-synchronous multi-source BFS over free cells (8-connected). A cell
/// reached by several seeds in the same step takes the lowest seed id.
pub(crate) fn wavefront(labels: &mut [u32], free: &[bool], w: usize, h: usize) {
    let mut reached_in = vec![0u32; labels.len()];
    let mut frontier: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    let mut round = 0;
    while !frontier.is_empty() {
        round += 1;
        let mut next: Vec<usize> = Vec::new();
        for &i in &frontier {
            let label = labels[i];
            for n in neighbors8(i, w, h) {
                if !free[n] {
                    continue;
                }
                if labels[n] == 0 {
                    labels[n] = label;
                    reached_in[n] = round;
                    next.push(n);
                } else if reached_in[n] == round && label < labels[n] {
                    labels[n] = label;
                }
            }
        }
        frontier = next;
    }
}

/// Exact Euclidean distance (in cells) from each set cell to the nearest
/// unset cell, treating everything outside the grid as unset. Unset cells get
/// 0.
pub fn distance_transform(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    // pad by one ring of unset cells so the border acts as an obstacle
    let (pw, ph) = (w + 2, h + 2);
    const INF: f64 = 1e20;
    let mut grid = vec![INF; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let inside = x >= 1 && y >= 1 && x <= w && y <= h && mask[(y - 1) * w + (x - 1)];
            if !inside {
                grid[y * pw + x] = 0.0;
            }
        }
    }
    let mut column = vec![0.0; ph];
    for x in 0..pw {
        for y in 0..ph {
            column[y] = grid[y * pw + x];
        }
        let out = squared_distance_1d(&column);
        for y in 0..ph {
            grid[y * pw + x] = out[y];
        }
    }
    for y in 0..ph {
        let out = squared_distance_1d(&grid[y * pw..(y + 1) * pw]);
        grid[y * pw..(y + 1) * pw].copy_from_slice(&out);
    }
    let mut dist = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            dist[y * w + x] = grid[(y + 1) * pw + x + 1].sqrt();
        }
    }
    dist
}

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn squared_distance_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let diff = q as f64 - v[k] as f64;
        *out = diff * diff + f[v[k]];
    }
    d
}

/// Mean position of each room, rounded; snapped to the nearest member cell
/// when the rounded mean falls outside the room.
pub fn room_centroids(map: &LabelMap) -> Vec<(RoomId, CellCoord)> {
    map.room_cells()
        .into_iter()
        .enumerate()
        .map(|(idx, cells)| {
            let id = RoomId(idx as u32 + 1);
            let n = cells.len() as f64;
            let mx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
            let my = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
            let rounded = CellCoord::new(mx.round() as usize, my.round() as usize);
            if rounded.x < map.width() && rounded.y < map.height() && map.get(rounded.x, rounded.y) == id.0 {
                return (id, rounded);
            }
            // cells are in row-major order, so min_by keeps the first on ties
            let nearest = cells
                .iter()
                .copied()
                .min_by(|a, b| {
                    let da = (a.x as f64 - mx).powi(2) + (a.y as f64 - my).powi(2);
                    let db = (b.x as f64 - mx).powi(2) + (b.y as f64 - my).powi(2);
                    da.total_cmp(&db)
                })
                .expect("rooms are non-empty");
            (id, nearest)
        })
        .collect()
}
