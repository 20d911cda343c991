//! Object observation from room centroids.
//!
//! Objects come from an annotation file of named grid positions. A room
//! observes an object when the object lies within range of the room's
//! centroid and the Bresenham line between them crosses no occupied cell.
//! The object's own cell is exempt, so things placed on furniture cells stay
//! visible.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{CellCoord, CellState, OccupancyGrid, RoomId};

/// Default observation range in meters.
pub const DEFAULT_MAX_RANGE: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("annotation parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("annotation {index} ({name:?}) at ({x}, {y}) is outside the {width}x{height} map")]
    Bounds { index: usize, name: String, x: i64, y: i64, width: usize, height: usize },
    #[error("object list references room {0}, which does not exist")]
    UnknownRoom(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectAnnotation {
    pub name: String,
    pub position: CellCoord,
}

#[derive(Deserialize)]
struct AnnotationFile {
    objects: Vec<RawAnnotation>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    name: String,
    x: i64,
    y: i64,
}

/// Per-room multiset of observed object names, keyed by room id. Every room
/// of the map has an entry, possibly empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub rooms: BTreeMap<RoomId, Vec<String>>,
}

impl ObservationSet {
    pub fn empty(room_count: u32) -> Self {
        Self { rooms: (1..=room_count).map(|id| (RoomId(id), Vec::new())).collect() }
    }

    pub fn objects(&self, room: RoomId) -> &[String] {
        self.rooms.get(&room).map_or(&[], Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("observation sets serialize")
    }
}

pub fn parse_annotations(text: &str, width: usize, height: usize) -> Result<Vec<ObjectAnnotation>, ObjectError> {
    let file: AnnotationFile = serde_json::from_str(text)?;
    file.objects
        .into_iter()
        .enumerate()
        .map(|(index, raw)| {
            let name = raw.name.trim().to_lowercase();
            if raw.x < 0 || raw.y < 0 || raw.x as usize >= width || raw.y as usize >= height {
                return Err(ObjectError::Bounds { index, name, x: raw.x, y: raw.y, width, height });
            }
            Ok(ObjectAnnotation { name, position: CellCoord::new(raw.x as usize, raw.y as usize) })
        })
        .collect()
}

pub fn read_annotations(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Vec<ObjectAnnotation>, ObjectError> {
    parse_annotations(&fs::read_to_string(path)?, width, height)
}

/// Cells on the Bresenham line from `from` to `to`, both endpoints included.
pub fn bresenham(from: CellCoord, to: CellCoord) -> Vec<CellCoord> {
    let (mut x0, mut y0) = (from.x as i64, from.y as i64);
    let (x1, y1) = (to.x as i64, to.y as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut line = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        line.push(CellCoord::new(x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    line
}

/// Whether `target` is visible from `from`: no occupied cell on the line,
/// ignoring the target cell itself.
pub fn line_of_sight(grid: &OccupancyGrid, from: CellCoord, target: CellCoord) -> bool {
    bresenham(from, target)
        .into_iter()
        .filter(|c| *c != target)
        .all(|c| grid.get(c.x, c.y) != CellState::Occupied)
}

pub fn observe(
    annotations: &[ObjectAnnotation],
    grid: &OccupancyGrid,
    centroids: &[(RoomId, CellCoord)],
    max_range: f64,
) -> ObservationSet {
    let range_cells = max_range / grid.resolution();
    let range_sq = range_cells * range_cells;
    let mut set = ObservationSet::default();
    for &(room, centroid) in centroids {
        let seen = annotations
            .iter()
            .filter(|a| {
                let dx = a.position.x as f64 - centroid.x as f64;
                let dy = a.position.y as f64 - centroid.y as f64;
                dx * dx + dy * dy <= range_sq && line_of_sight(grid, centroid, a.position)
            })
            .map(|a| a.name.clone())
            .collect();
        set.rooms.insert(room, seen);
    }
    set
}

#[derive(Deserialize)]
struct RoomListFile {
    #[serde(default)]
    rooms: BTreeMap<String, Vec<String>>,
}

pub fn parse_room_lists(text: &str) -> Result<BTreeMap<String, Vec<String>>, ObjectError> {
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    Ok(serde_json::from_str::<RoomListFile>(text)?.rooms)
}

/// Adds precomputed per-room object names to `observations`.
pub fn merge_predeclared(mut observations: ObservationSet, text: &str) -> Result<ObservationSet, ObjectError> {
    for (key, names) in parse_room_lists(text)? {
        let id = key.trim().parse::<u32>().ok().map(RoomId);
        let entry = id
            .and_then(|id| observations.rooms.get_mut(&id))
            .ok_or_else(|| ObjectError::UnknownRoom(key.clone()))?;
        entry.extend(names.into_iter().map(|n| n.trim().to_lowercase()));
    }
    Ok(observations)
}

pub fn merge_predeclared_file(observations: ObservationSet, path: impl AsRef<Path>) -> Result<ObservationSet, ObjectError> {
    merge_predeclared(observations, &fs::read_to_string(path)?)
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<ObservationSet, ObjectError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
