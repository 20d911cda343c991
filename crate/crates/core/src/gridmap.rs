//! Occupancy grids, room label maps and their file formats.
//!
//! Occupancy maps are read from PGM (`P2`/`P5`, maxval 255). A header comment
//! of the form `# resolution: <float>` sets the cell size in meters; without
//! it the grid uses [`DEFAULT_RESOLUTION`]. Pixel values map to cell states by
//! thresholding: `>= 250` is free, `<= 50` is occupied, anything in between is
//! unknown. These thresholds are conventions, not something the map format
//! itself carries.
//!
//! Label maps are canonical as a plain text grid: a `<width> <height>` line
//! followed by `height` rows of `width` space separated room ids, `0` being
//! "no room". PPM output is for viewing only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cell size used when a PGM carries no `# resolution:` comment.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

const FREE_THRESHOLD: u8 = 250;
const OCCUPIED_THRESHOLD: u8 = 50;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("parse error on line {line}: {message}")]
    ParseLine { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    pub fn from_pixel(value: u8) -> Self {
        if value >= FREE_THRESHOLD {
            CellState::Free
        } else if value <= OCCUPIED_THRESHOLD {
            CellState::Occupied
        } else {
            CellState::Unknown
        }
    }

    pub fn to_pixel(self) -> u8 {
        match self {
            CellState::Free => 255,
            CellState::Occupied => 0,
            CellState::Unknown => 128,
        }
    }
}

/// Column/row address of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub x: usize,
    pub y: usize,
}

impl CellCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The 2D map: row-major cells plus the physical size of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<CellState>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Invalid(format!("empty dimensions {width}x{height}")));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Invalid(format!("resolution must be > 0, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(MapError::Shape(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Self { width, height, resolution, cells })
    }

    /// A grid with every cell in `state`.
    pub fn filled(width: usize, height: usize, resolution: f64, state: CellState) -> Result<Self, MapError> {
        Self::new(width, height, resolution, vec![state; width * height])
    }

    /// Builds a grid from rows of characters: `.` free, `#` occupied, `?` unknown.
    pub fn from_ascii(rows: &[&str], resolution: f64) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MapError::Shape(format!("row {y} has a different width")));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => CellState::Free,
                    '#' => CellState::Occupied,
                    '?' => CellState::Unknown,
                    other => {
                        return Err(MapError::ParseLine {
                            line: y + 1,
                            message: format!("unexpected character {other:?}"),
                        })
                    }
                });
            }
        }
        Self::new(width, height, resolution, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> CellState {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, state: CellState) {
        self.cells[y * self.width + x] = state;
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == CellState::Free
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CellState::Free).count()
    }

    /// Area of one cell in m².
    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }
}

pub fn read_occupancy(path: impl AsRef<Path>) -> Result<OccupancyGrid, MapError> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    resolution: Option<f64>,
}

impl<'a> HeaderCursor<'a> {
    /// Skips whitespace and comments, recording any `# resolution:` value.
    fn skip_filler(&mut self) -> Result<(), MapError> {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                let comment = String::from_utf8_lossy(&self.bytes[start + 1..self.pos]);
                if let Some(rest) = comment.trim().strip_prefix("resolution:") {
                    let value: f64 = rest.trim().parse().map_err(|_| MapError::Parse {
                        position: start,
                        message: format!("bad resolution comment {:?}", comment.trim()),
                    })?;
                    self.resolution = Some(value);
                }
            } else {
                break;
            }
        }
        Ok(())
    }

    fn next_uint(&mut self, what: &str) -> Result<usize, MapError> {
        self.skip_filler()?;
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(MapError::Parse { position: start, message: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MapError::Parse { position: start, message: format!("{what} out of range") })
    }
}

/// Parses an in-memory `P2` or `P5` graymap.
pub fn parse_pgm(bytes: &[u8]) -> Result<OccupancyGrid, MapError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(MapError::Parse { position: 0, message: "missing magic number".into() });
    }
    let binary = match bytes[1] {
        b'2' => false,
        b'5' => true,
        other => {
            return Err(MapError::UnsupportedFormat(format!("magic P{}", other as char)));
        }
    };
    let mut cursor = HeaderCursor { bytes, pos: 2, resolution: None };
    let width = cursor.next_uint("width")?;
    let height = cursor.next_uint("height")?;
    let maxval_pos = cursor.pos;
    let maxval = cursor.next_uint("maxval")?;
    if maxval != 255 {
        return Err(MapError::UnsupportedFormat(format!("maxval {maxval} at byte {maxval_pos}")));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cursor.pos >= bytes.len() || !bytes[cursor.pos].is_ascii_whitespace() {
            return Err(MapError::Parse { position: cursor.pos, message: "expected raster".into() });
        }
        let start = cursor.pos + 1;
        let raster = bytes.get(start..start + count).ok_or_else(|| MapError::Parse {
            position: bytes.len(),
            message: format!("raster truncated, need {count} bytes"),
        })?;
        pixels.extend_from_slice(raster);
    } else {
        for _ in 0..count {
            let pos = cursor.pos;
            let v = cursor.next_uint("pixel value")?;
            let v = u8::try_from(v).map_err(|_| MapError::Parse {
                position: pos,
                message: format!("pixel value {v} exceeds maxval"),
            })?;
            pixels.push(v);
        }
    }
    let resolution = cursor.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let cells = pixels.into_iter().map(CellState::from_pixel).collect();
    OccupancyGrid::new(width, height, resolution, cells)
}

/// Writes the grid as binary PGM with a resolution comment.
pub fn write_occupancy(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), MapError> {
    let mut out = format!(
        "P5\n# resolution: {}\n{} {}\n255\n",
        grid.resolution, grid.width, grid.height
    )
    .into_bytes();
    out.extend(grid.cells.iter().map(|c| c.to_pixel()));
    fs::write(path, out)?;
    Ok(())
}

/// Room id as used in label maps. Zero is reserved for "no room" and never
/// appears as a `RoomId`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u32);

impl RoomId {
    pub fn get(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Row-major grid of room ids with the dense id invariant: the non-zero ids
/// present are exactly `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    room_count: u32,
}

/// Old id to new id, in order of first appearance.
pub type IdRemap = BTreeMap<u32, u32>;

impl LabelMap {
    /// Wraps labels that are already dense.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, MapError> {
        if labels.len() != width * height {
            return Err(MapError::Shape(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=max).find(|&id| !seen[id as usize]) {
            return Err(MapError::Invalid(format!("room ids not dense: {missing} missing")));
        }
        Ok(Self { width, height, labels, room_count: max })
    }

    /// Renumbers arbitrary ids to `1..=K` by first appearance in a row-major
    /// scan. Zero stays zero. Ids that already form `1..=K` are kept as they
    /// are (identity remap), so writing and reading a dense map is lossless.
    pub fn densify(width: usize, height: usize, mut labels: Vec<u32>) -> Result<(Self, IdRemap), MapError> {
        if labels.len() != width * height {
            return Err(MapError::Shape(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        let present: BTreeSet<u32> = labels.iter().copied().filter(|&l| l > 0).collect();
        if present.last().is_none_or(|&max| max as usize == present.len()) {
            let remap = present.iter().map(|&id| (id, id)).collect();
            let room_count = present.len() as u32;
            return Ok((Self { width, height, labels, room_count }, remap));
        }
        let mut remap = IdRemap::new();
        let mut next = 1;
        for l in labels.iter_mut() {
            if *l == 0 {
                continue;
            }
            let new = *remap.entry(*l).or_insert_with(|| {
                next += 1;
                next - 1
            });
            *l = new;
        }
        let room_count = next - 1;
        Ok((Self { width, height, labels, room_count }, remap))
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![0; width * height], room_count: 0 }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Number of rooms K.
    pub fn room_count(&self) -> u32 {
        self.room_count
    }

    pub fn room_ids(&self) -> impl Iterator<Item = RoomId> {
        (1..=self.room_count).map(RoomId)
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Cell coordinates of every room, indexed by `RoomId::index`.
    pub fn room_cells(&self) -> Vec<Vec<CellCoord>> {
        let mut cells = vec![Vec::new(); self.room_count as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                cells[l as usize - 1].push(CellCoord::new(i % self.width, i / self.width));
            }
        }
        cells
    }
}

pub fn read_label_map(path: impl AsRef<Path>) -> Result<(LabelMap, IdRemap), MapError> {
    parse_label_map(&fs::read_to_string(path)?)
}

pub fn parse_label_map(text: &str) -> Result<(LabelMap, IdRemap), MapError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or(MapError::ParseLine { line: 1, message: "missing header".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| MapError::ParseLine { line: 1, message: format!("bad header {header:?}") })?;
    let [width, height] = dims[..] else {
        return Err(MapError::ParseLine { line: 1, message: "header needs width and height".into() });
    };
    let mut labels = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (idx, line) in lines {
        let before = labels.len();
        for token in line.split_whitespace() {
            let v: u32 = token.parse().map_err(|_| MapError::ParseLine {
                line: idx + 1,
                message: format!("non-integer token {token:?}"),
            })?;
            labels.push(v);
        }
        if labels.len() - before != width {
            return Err(MapError::Shape(format!(
                "line {} has {} values, expected {width}",
                idx + 1,
                labels.len() - before
            )));
        }
        rows += 1;
    }
    if rows != height {
        return Err(MapError::Shape(format!("{rows} rows, expected {height}")));
    }
    LabelMap::densify(width, height, labels)
}

pub fn format_label_map(map: &LabelMap) -> String {
    let mut out = format!("{} {}\n", map.width, map.height);
    for row in map.labels.chunks(map.width) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    fs::write(path, format_label_map(map))?;
    Ok(())
}

const HUE_WHEEL: u32 = 6 * 255;
// Closest integer to HUE_WHEEL / golden ratio that is coprime with it, so
// the first HUE_WHEEL ids all land on distinct hues.
const HUE_STEP: u32 = 943;

/// Display color for a room id. Id 0 is black; rooms walk the fully
/// saturated hue wheel in golden-ratio steps.
pub fn palette(id: u32) -> [u8; 3] {
    if id == 0 {
        return [0, 0, 0];
    }
    let hue = (id as u64 * HUE_STEP as u64 % HUE_WHEEL as u64) as u32;
    let f = (hue % 255) as u8;
    match hue / 255 {
        0 => [255, f, 0],
        1 => [255 - f, 255, 0],
        2 => [0, 255, f],
        3 => [0, 255 - f, 255],
        4 => [f, 0, 255],
        _ => [255, 0, 255 - f],
    }
}

/// Path of the legend file written next to a PPM export.
pub fn legend_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".legend");
    PathBuf::from(name)
}

/// Writes a binary P6 rendering plus an `id R G B` legend sidecar.
pub fn export_ppm(map: &LabelMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    let path = path.as_ref();
    let mut out = format!("P6\n{} {}\n255\n", map.width, map.height).into_bytes();
    for &l in &map.labels {
        out.extend_from_slice(&palette(l));
    }
    fs::write(path, out)?;

    let mut legend = io::BufWriter::new(fs::File::create(legend_path(path))?);
    for id in 1..=map.room_count {
        let [r, g, b] = palette(id);
        writeln!(legend, "{id} {r} {g} {b}")?;
    }
    legend.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn all_white_pgm_is_free() {
        let grid = parse_pgm(b"P2\n3 3\n255\n255 255 255\n255 255 255\n255 255 255\n").unwrap();
        assert_eq!(grid.free_count(), 9);
        assert_eq!(grid.resolution(), DEFAULT_RESOLUTION);
    }

    #[test]
    fn thresholds_cover_every_pixel() {
        assert_eq!(CellState::from_pixel(128), CellState::Unknown);
        assert_eq!(CellState::from_pixel(250), CellState::Free);
        assert_eq!(CellState::from_pixel(249), CellState::Unknown);
        assert_eq!(CellState::from_pixel(50), CellState::Occupied);
        assert_eq!(CellState::from_pixel(51), CellState::Unknown);
        for v in 0..=255u8 {
            let s = CellState::from_pixel(v);
            let hits = [CellState::Free, CellState::Occupied, CellState::Unknown]
                .iter()
                .filter(|c| **c == s)
                .count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn binary_pgm_with_resolution_comment() {
        let mut bytes = b"P5\n# resolution: 0.1\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 255, 0]);
        let grid = parse_pgm(&bytes).unwrap();
        assert_eq!(grid.resolution(), 0.1);
        assert_eq!(
            grid.cells(),
            &[CellState::Free, CellState::Occupied, CellState::Free, CellState::Occupied]
        );
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(parse_pgm(b"P6\n1 1\n255\n\0\0\0"), Err(MapError::UnsupportedFormat(_))));
        assert!(matches!(parse_pgm(b"P2\nx 1\n255\n0"), Err(MapError::Parse { position: 3, .. })));
        assert!(matches!(parse_pgm(b"P5\n2 2\n255\n\0"), Err(MapError::Parse { .. })));
        assert!(matches!(parse_pgm(b"P2\n1 1\n15\n0"), Err(MapError::UnsupportedFormat(_))));
        assert!(matches!(parse_pgm(b"P2\n1 1\n255\n256"), Err(MapError::Parse { .. })));
    }

    #[test]
    fn densify_by_first_appearance() {
        let (map, remap) = parse_label_map("2 2\n0 5\n5 9\n").unwrap();
        assert_eq!(map.labels(), &[0, 1, 1, 2]);
        assert_eq!(remap, IdRemap::from([(5, 1), (9, 2)]));

        let (zeros, _) = parse_label_map("2 1\n0 0\n").unwrap();
        assert_eq!(zeros.room_count(), 0);

        let (dense, remap) = parse_label_map("2 2\n0 1\n1 2\n").unwrap();
        assert_eq!(dense.labels(), &[0, 1, 1, 2]);
        assert!(remap.iter().all(|(a, b)| a == b));

        // contiguous ids out of scan order are already dense
        let (kept, remap) = parse_label_map("3 1
2 0 1
").unwrap();
        assert_eq!(kept.labels(), &[2, 0, 1]);
        assert_eq!(remap, IdRemap::from([(1, 1), (2, 2)]));
    }

    #[test]
    fn label_map_errors() {
        assert!(matches!(parse_label_map("2 1\n0 x\n"), Err(MapError::ParseLine { line: 2, .. })));
        assert!(matches!(parse_label_map("2 2\n0 1\n1\n"), Err(MapError::Shape(_))));
        assert!(matches!(parse_label_map("2 2\n0 1\n"), Err(MapError::Shape(_))));
        assert!(LabelMap::new(2, 1, vec![0, 2]).is_err());
    }

    #[test]
    fn single_row_body() {
        let map = LabelMap::new(3, 1, vec![1, 2, 3]).unwrap();
        assert_eq!(format_label_map(&map), "3 1\n1 2 3\n");
        let zeros = LabelMap::empty(2, 2);
        assert_eq!(format_label_map(&zeros), "2 2\n0 0\n0 0\n");
    }

    #[test]
    fn label_map_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.labels");
        let map = LabelMap::new(2, 2, vec![1, 0, 2, 2]).unwrap();
        write_label_map(&map, &path).unwrap();
        assert_eq!(read_label_map(&path).unwrap().0, map);
    }

    #[test]
    fn palette_is_injective_and_never_black() {
        assert_eq!(palette(0), [0, 0, 0]);
        let mut seen = HashSet::new();
        for id in 1..=1000 {
            let c = palette(id);
            assert_ne!(c, [0, 0, 0]);
            assert!(seen.insert(c), "collision at id {id}");
        }
    }

    #[test]
    fn ppm_export_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::new(2, 2, vec![1, 0, 2, 2]).unwrap();
        let a = dir.path().join("a.ppm");
        let b = dir.path().join("b.ppm");
        export_ppm(&map, &a).unwrap();
        export_ppm(&map, &b).unwrap();
        let bytes = fs::read(&a).unwrap();
        assert_eq!(bytes, fs::read(&b).unwrap());
        assert!(bytes.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(&bytes[11 + 3..11 + 6], &[0, 0, 0]);
        let legend = fs::read_to_string(legend_path(&a)).unwrap();
        assert_eq!(legend.lines().count(), 2);
        let [r, g, b] = palette(1);
        assert_eq!(legend.lines().next().unwrap(), format!("1 {r} {g} {b}"));
    }

    #[test]
    fn occupancy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = OccupancyGrid::from_ascii(&[".#?", "..#"], 0.25).unwrap();
        let path = dir.path().join("g.pgm");
        write_occupancy(&grid, &path).unwrap();
        assert_eq!(read_occupancy(&path).unwrap(), grid);
    }
}
