//! Inputs shared by the benchmarks in `benches/`.

use std::path::{Path, PathBuf};

use selros_core::gridmap::{read_occupancy, CellState, OccupancyGrid};

pub fn fixture(env: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(env)
}

pub fn fixture_grid(env: &str) -> OccupancyGrid {
    read_occupancy(fixture(env).join("map.pgm")).expect("fixture map loads")
}

/// A `rooms_x` by `rooms_y` block of square rooms, `room` cells wide, with
/// one-cell walls and a two-cell door in every shared wall. Resolution 0.25
/// m/cell, so a 16-cell room is 16 m².
pub fn synthetic_house(rooms_x: usize, rooms_y: usize, room: usize) -> OccupancyGrid {
    let pitch = room + 1;
    let (w, h) = (rooms_x * pitch + 1, rooms_y * pitch + 1);
    let mut grid = OccupancyGrid::filled(w, h, 0.25, CellState::Occupied).expect("positive size");
    for ry in 0..rooms_y {
        for rx in 0..rooms_x {
            let (x0, y0) = (rx * pitch + 1, ry * pitch + 1);
            for y in y0..y0 + room {
                for x in x0..x0 + room {
                    grid.set(x, y, CellState::Free);
                }
            }
            let mid = room / 2;
            if rx + 1 < rooms_x {
                grid.set(x0 + room, y0 + mid, CellState::Free);
                grid.set(x0 + room, y0 + mid - 1, CellState::Free);
            }
            if ry + 1 < rooms_y {
                grid.set(x0 + mid, y0 + room, CellState::Free);
                grid.set(x0 + mid - 1, y0 + room, CellState::Free);
            }
        }
    }
    grid
}
