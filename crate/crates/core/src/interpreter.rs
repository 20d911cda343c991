//! Per-room geometry: area, bounding rectangle, centroid and adjacency.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{CellCoord, LabelMap, OccupancyGrid, RoomId};
use crate::segmentation::room_centroids;

/// Default dilation radius (cells) for adjacency detection.
pub const DEFAULT_ADJACENCY_DILATION: usize = 1;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("label map is {0}x{1} but the grid is {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
}

/// Inclusive cell bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn span_x(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn span_y(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        (self.min_x..=self.max_x).contains(&c.x) && (self.min_y..=self.max_y).contains(&c.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomArea {
    pub cells: usize,
    pub m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomShape {
    pub bbox: BoundingBox,
    /// Longer bbox side in meters.
    pub length_m: f64,
    /// Shorter bbox side in meters.
    pub width_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRecord {
    pub id: RoomId,
    pub area_cells: usize,
    pub area_m2: f64,
    pub bbox: BoundingBox,
    pub length_m: f64,
    pub width_m: f64,
    pub centroid: CellCoord,
    pub adjacent: BTreeSet<RoomId>,
}

fn check_shape(map: &LabelMap, grid: &OccupancyGrid) -> Result<(), InterpretError> {
    if map.same_shape(grid.width(), grid.height()) {
        Ok(())
    } else {
        Err(InterpretError::ShapeMismatch(map.width(), map.height(), grid.width(), grid.height()))
    }
}

pub fn compute_areas(map: &LabelMap, grid: &OccupancyGrid) -> Result<Vec<RoomArea>, InterpretError> {
    check_shape(map, grid)?;
    let mut counts = vec![0usize; map.room_count() as usize];
    for &l in map.labels() {
        if l > 0 {
            counts[l as usize - 1] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|cells| RoomArea { cells, m2: cells as f64 * grid.cell_area() })
        .collect())
}

pub fn compute_shape(map: &LabelMap, grid: &OccupancyGrid) -> Result<Vec<RoomShape>, InterpretError> {
    check_shape(map, grid)?;
    let mut boxes: Vec<Option<BoundingBox>> = vec![None; map.room_count() as usize];
    for y in 0..map.height() {
        for x in 0..map.width() {
            let l = map.get(x, y);
            if l == 0 {
                continue;
            }
            let b = boxes[l as usize - 1].get_or_insert(BoundingBox { min_x: x, min_y: y, max_x: x, max_y: y });
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
    }
    let res = grid.resolution();
    Ok(boxes
        .into_iter()
        .map(|b| {
            let bbox = b.expect("dense label map has no empty rooms");
            let (sx, sy) = (bbox.span_x(), bbox.span_y());
            RoomShape { bbox, length_m: sx.max(sy) as f64 * res, width_m: sx.min(sy) as f64 * res }
        })
        .collect())
}

/// Rooms are adjacent when their masks, each dilated by `dilation` cells with
/// an 8-connected (square) element, overlap.
///
/// Two square dilations of radius r overlap exactly when some pair of member
/// cells is within Chebyshev distance 2r, which is what is checked here.
pub fn compute_adjacency(map: &LabelMap, dilation: usize) -> Vec<BTreeSet<RoomId>> {
    let mut adjacent = vec![BTreeSet::new(); map.room_count() as usize];
    let reach = 2 * dilation as i64;
    let (w, h) = (map.width() as i64, map.height() as i64);
    for y in 0..h {
        for x in 0..w {
            let a = map.get(x as usize, y as usize);
            if a == 0 {
                continue;
            }
            for ny in (y - reach).max(0)..=(y + reach).min(h - 1) {
                for nx in (x - reach).max(0)..=(x + reach).min(w - 1) {
                    let b = map.get(nx as usize, ny as usize);
                    if b != 0 && b != a {
                        adjacent[a as usize - 1].insert(RoomId(b));
                    }
                }
            }
        }
    }
    adjacent
}

pub fn interpret(map: &LabelMap, grid: &OccupancyGrid, dilation: usize) -> Result<Vec<RoomRecord>, InterpretError> {
    let areas = compute_areas(map, grid)?;
    let shapes = compute_shape(map, grid)?;
    let adjacency = compute_adjacency(map, dilation);
    let centroids = room_centroids(map);
    Ok(areas
        .into_iter()
        .zip(shapes)
        .zip(adjacency)
        .zip(centroids)
        .map(|(((area, shape), adjacent), (id, centroid))| RoomRecord {
            id,
            area_cells: area.cells,
            area_m2: area.m2,
            bbox: shape.bbox,
            length_m: shape.length_m,
            width_m: shape.width_m,
            centroid,
            adjacent,
        })
        .collect())
}
