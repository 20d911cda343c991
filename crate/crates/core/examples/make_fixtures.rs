//! Regenerates the bundled fixture environments under `fixtures/`.
//!
//! Each environment is a walled floor plan at 0.25 m/cell built from
//! rectangles. Furniture is drawn as occupied cells inside rooms; objects are
//! annotated on furniture or free cells. Ground truth labels every free cell
//! of a room (doorways included) with that room's id.
//!
//! ```text
//! cargo run -p selros-core --example make_fixtures -- fixtures
//! ```

use std::fs;
use std::path::Path;

use selros_core::gridmap::{write_label_map, write_occupancy, CellState, LabelMap, OccupancyGrid};

const RESOLUTION: f64 = 0.25;

struct Env {
    name: &'static str,
    grid: OccupancyGrid,
    gt: Vec<u32>,
    objects: Vec<(&'static str, usize, usize)>,
}

impl Env {
    fn new(name: &'static str, width: usize, height: usize) -> Self {
        Self {
            name,
            grid: OccupancyGrid::filled(width, height, RESOLUTION, CellState::Occupied).unwrap(),
            gt: vec![0; width * height],
            objects: Vec::new(),
        }
    }

    /// Free rectangle `x0..=x1, y0..=y1` belonging to ground-truth room `id`.
    fn room(&mut self, id: u32, x0: usize, y0: usize, x1: usize, y1: usize) -> &mut Self {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.grid.set(x, y, CellState::Free);
                self.gt[y * self.grid.width() + x] = id;
            }
        }
        self
    }

    /// Doorway cells, counted as part of room `id`.
    fn door(&mut self, id: u32, x0: usize, y0: usize, x1: usize, y1: usize) -> &mut Self {
        self.room(id, x0, y0, x1, y1)
    }

    fn furniture(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) -> &mut Self {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.grid.set(x, y, CellState::Occupied);
                self.gt[y * self.grid.width() + x] = 0;
            }
        }
        self
    }

    fn object(&mut self, name: &'static str, x: usize, y: usize) -> &mut Self {
        self.objects.push((name, x, y));
        self
    }

    fn write(&self, root: &Path) {
        let dir = root.join(self.name);
        fs::create_dir_all(&dir).unwrap();
        write_occupancy(&self.grid, dir.join("map.pgm")).unwrap();
        let (gt, _) = LabelMap::densify(self.grid.width(), self.grid.height(), self.gt.clone()).unwrap();
        write_label_map(&gt, dir.join("gt.labels")).unwrap();
        let objects: Vec<String> = self
            .objects
            .iter()
            .map(|(n, x, y)| format!("    {{\"name\": \"{n}\", \"x\": {x}, \"y\": {y}}}"))
            .collect();
        fs::write(dir.join("objects.json"), format!("{{\n  \"objects\": [\n{}\n  ]\n}}\n", objects.join(",\n")))
            .unwrap();
    }
}

/// Apartment: living room split by a sofa and shelf, kitchen split by an
/// island, bedroom split by a bed, plus bathroom and office.
fn env_a() -> Env {
    let mut e = Env::new("env_a", 42, 26);
    e.room(1, 1, 1, 24, 14) // living
        .room(2, 26, 1, 40, 14) // kitchen
        .room(3, 1, 16, 18, 24) // bedroom
        .room(4, 20, 16, 28, 24) // bathroom
        .room(5, 30, 16, 40, 24) // office
        .door(1, 25, 6, 25, 7)
        .door(3, 8, 15, 9, 15)
        .door(4, 22, 15, 23, 15)
        .door(5, 34, 15, 35, 15);
    e.furniture(12, 1, 12, 12).object("sofa", 12, 6).object("sofa", 12, 7).object("tv", 3, 2);
    e.furniture(33, 1, 33, 12).object("countertop", 40, 10).object("fridge", 39, 2).object("stove", 27, 2);
    e.furniture(9, 18, 10, 24).object("bed", 9, 20).object("bed", 10, 20).object("lamp", 2, 23);
    e.object("toilet", 20, 24).object("sink", 28, 16);
    e.object("desk", 40, 17).object("chair", 39, 17);
    e
}

/// Corridor house: bedroom and living room split by a wardrobe and a shelf,
/// office split by a bookcase, bathroom and kitchen off a long hallway.
fn env_b() -> Env {
    let mut e = Env::new("env_b", 48, 22);
    e.room(1, 1, 1, 22, 7) // bedroom
        .room(2, 24, 1, 34, 7) // bathroom
        .room(3, 36, 1, 46, 7) // kitchen
        .room(4, 1, 9, 46, 11) // hallway
        .room(5, 1, 13, 30, 20) // living
        .room(6, 32, 13, 46, 20) // office
        .door(1, 3, 8, 4, 8)
        .door(2, 28, 8, 29, 8)
        .door(3, 44, 8, 45, 8)
        .door(5, 5, 12, 6, 12)
        .door(6, 42, 12, 43, 12);
    e.furniture(11, 1, 11, 5).object("bed", 11, 3);
    e.object("toilet", 33, 1).object("sink", 25, 1);
    e.object("stove", 45, 1).object("fridge", 37, 1);
    e.furniture(15, 15, 15, 20).object("tv", 15, 17).object("sofa", 26, 20);
    e.furniture(39, 13, 39, 18).object("desk", 39, 16).object("chair", 39, 15);
    e
}

/// Wide living room cut into three by a sofa and a shelf, plus bedroom,
/// bathroom and kitchen.
fn env_c() -> Env {
    let mut e = Env::new("env_c", 36, 30);
    e.room(1, 1, 1, 34, 12) // living
        .room(2, 1, 14, 16, 28) // bedroom
        .room(3, 18, 14, 34, 20) // bathroom
        .room(4, 18, 22, 34, 28) // kitchen
        .door(2, 4, 13, 5, 13)
        .door(3, 30, 13, 31, 13)
        .door(4, 17, 25, 17, 26);
    e.furniture(12, 1, 12, 10).object("sofa", 12, 5);
    e.furniture(24, 3, 24, 12).object("tv", 24, 8);
    e.object("bed", 3, 27).object("bed", 4, 27).object("lamp", 1, 20);
    e.object("shower", 34, 19).object("toilet", 19, 19);
    e.object("stove", 34, 28).object("fridge", 34, 23);
    e
}

/// Kitchen split by an island and office split by a row of desks, above a
/// bedroom split by a wardrobe and an undivided bathroom.
fn env_d() -> Env {
    let mut e = Env::new("env_d", 40, 24);
    e.room(1, 1, 1, 19, 10) // kitchen
        .room(2, 21, 1, 38, 10) // office
        .room(3, 1, 12, 24, 22) // bedroom
        .room(4, 26, 12, 38, 22) // bathroom
        .door(2, 20, 9, 20, 10)
        .door(3, 3, 11, 4, 11)
        .door(4, 37, 11, 38, 11);
    e.furniture(10, 3, 10, 10).object("countertop", 10, 6);
    e.furniture(29, 1, 29, 8).object("desk", 29, 4).object("chair", 29, 5);
    e.furniture(12, 12, 12, 20).object("bed", 12, 16);
    e.object("toilet", 37, 22).object("bathtub", 27, 22);
    e
}

/// Two bedrooms on either side of a bathroom, one split by a wardrobe, over
/// a living room cut into three.
fn env_e() -> Env {
    let mut e = Env::new("env_e", 44, 24);
    e.room(1, 1, 1, 14, 10) // bedroom
        .room(2, 16, 1, 26, 10) // bathroom
        .room(3, 28, 1, 42, 10) // bedroom
        .room(4, 1, 12, 42, 22) // living
        .door(1, 7, 11, 8, 11)
        .door(2, 20, 11, 21, 11)
        .door(3, 31, 11, 32, 11);
    e.object("bed", 2, 2).object("bed", 3, 2);
    e.object("shower", 25, 1).object("toilet", 17, 1);
    e.furniture(35, 1, 35, 8).object("bed", 35, 4);
    e.furniture(14, 14, 14, 22).object("sofa", 14, 18);
    e.furniture(28, 12, 28, 20).object("tv", 28, 16);
    e
}

/// Two kitchens separated by a living room: equal labels without adjacency
/// must not merge.
fn env_kitchen() -> Env {
    let mut e = Env::new("env_kitchen", 40, 12);
    e.room(1, 1, 1, 11, 10) // kitchen
        .room(2, 13, 1, 26, 10) // living
        .room(3, 28, 1, 38, 10) // kitchen
        .door(1, 12, 4, 12, 5)
        .door(3, 27, 6, 27, 7);
    e.object("stove", 1, 10).object("fridge", 38, 1);
    e.object("sofa", 19, 1).object("tv", 20, 1);
    e.object("stove", 38, 10);
    e
}

fn label_map(width: usize, height: usize, label: impl Fn(usize, usize) -> u32) -> LabelMap {
    let labels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| label(x, y)).collect();
    LabelMap::new(width, height, labels).unwrap()
}

/// Single ground-truth room split 60/40, and two rooms (40/60) predicted as
/// one.
fn metrics(root: &Path) {
    let dir = root.join("metrics");
    fs::create_dir_all(&dir).unwrap();
    write_label_map(&label_map(10, 10, |_, _| 1), dir.join("split_gt.labels")).unwrap();
    write_label_map(&label_map(10, 10, |_, y| if y < 6 { 1 } else { 2 }), dir.join("split_pred.labels")).unwrap();
    write_label_map(&label_map(10, 10, |_, y| if y < 4 { 1 } else { 2 }), dir.join("merge_gt.labels")).unwrap();
    write_label_map(&label_map(10, 10, |_, _| 1), dir.join("merge_pred.labels")).unwrap();
    println!("wrote {}", dir.display());
}

/// Two rooms either side of a vertical wall `thickness` cells thick.
fn walls(root: &Path) {
    let dir = root.join("walls");
    fs::create_dir_all(&dir).unwrap();
    for thickness in [1, 3] {
        let (w, h, x0) = (10 + thickness, 5, 5);
        let mut grid = OccupancyGrid::filled(w, h, RESOLUTION, CellState::Free).unwrap();
        for y in 0..h {
            for x in x0..x0 + thickness {
                grid.set(x, y, CellState::Occupied);
            }
        }
        let labels = label_map(w, h, |x, _| match x {
            x if x < x0 => 1,
            x if x < x0 + thickness => 0,
            _ => 2,
        });
        write_occupancy(&grid, dir.join(format!("wall{thickness}.pgm"))).unwrap();
        write_label_map(&labels, dir.join(format!("wall{thickness}.labels"))).unwrap();
    }
    println!("wrote {}", dir.display());
}

/// 10x10 room with a wall segment between (5, 2) and an object at (5, 8),
/// and the same room with the wall removed.
fn los(root: &Path) {
    let dir = root.join("los");
    fs::create_dir_all(&dir).unwrap();
    let open = OccupancyGrid::filled(10, 10, RESOLUTION, CellState::Free).unwrap();
    let mut walled = open.clone();
    for x in 2..=7 {
        walled.set(x, 5, CellState::Occupied);
    }
    write_occupancy(&walled, dir.join("walled.pgm")).unwrap();
    write_occupancy(&open, dir.join("open.pgm")).unwrap();
    fs::write(dir.join("objects.json"), "{\n  \"objects\": [\n    {\"name\": \"lamp\", \"x\": 5, \"y\": 8}\n  ]\n}\n").unwrap();
    println!("wrote {}", dir.display());
}

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    let root = Path::new(&root);
    for env in [env_a(), env_b(), env_c(), env_d(), env_e(), env_kitchen()] {
        env.write(root);
        println!("wrote {}", root.join(env.name).display());
    }
    metrics(root);
    walls(root);
    los(root);
}
