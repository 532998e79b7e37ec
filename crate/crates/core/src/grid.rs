//! Tile lattice, relevance masks and polyominoes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(row, col)` tile coordinate.
pub type Tile = (usize, usize);

/// A frame divided into square `tile_size` x `tile_size` pixel tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub frame_width: u32,
    pub frame_height: u32,
    pub tile_size: u32,
    pub cols: usize,
    pub rows: usize,
}

impl TileGrid {
    /// Builds the grid, rejecting frame sizes that are not a multiple of the tile size.
    pub fn new(frame_width: u32, frame_height: u32, tile_size: u32) -> Result<Self> {
        if frame_width == 0 || frame_height == 0 || tile_size == 0 {
            return Err(Error::GridMismatch(format!(
                "dimensions must be positive (got {frame_width}x{frame_height}, tile {tile_size})"
            )));
        }
        if frame_width % tile_size != 0 || frame_height % tile_size != 0 {
            return Err(Error::GridMismatch(format!(
                "{frame_width}x{frame_height} is not divisible by tile size {tile_size}"
            )));
        }
        Ok(Self {
            frame_width,
            frame_height,
            tile_size,
            cols: (frame_width / tile_size) as usize,
            rows: (frame_height / tile_size) as usize,
        })
    }

    pub fn n_tiles(&self) -> usize {
        self.rows * self.cols
    }

    pub fn contains(&self, (i, j): Tile) -> bool {
        i < self.rows && j < self.cols
    }

    /// Pixel rectangle of a tile.
    pub fn tile_rect(&self, (i, j): Tile) -> PixelRect {
        let ts = self.tile_size;
        PixelRect::new(j as u32 * ts, i as u32 * ts, (j as u32 + 1) * ts, (i as u32 + 1) * ts)
    }

    /// Tile containing a pixel-space point, if it lies inside the frame.
    pub fn tile_at(&self, x: f64, y: f64) -> Option<Tile> {
        if x < 0.0 || y < 0.0 || x >= self.frame_width as f64 || y >= self.frame_height as f64 {
            return None;
        }
        let ts = self.tile_size as f64;
        Some(((y / ts).floor() as usize, (x / ts).floor() as usize))
    }
}

/// Free-function form of [`TileGrid::new`].
pub fn build_grid(frame_width: u32, frame_height: u32, tile_size: u32) -> Result<TileGrid> {
    TileGrid::new(frame_width, frame_height, tile_size)
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub const fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x < self.x1 as f64 && y >= self.y0 as f64 && y < self.y1 as f64
    }
}

/// Per-tile relevance scores of one frame, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub frame: u32,
    pub rows: usize,
    pub cols: usize,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(frame: u32, rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != rows * cols {
            return Err(Error::GridMismatch(format!(
                "expected {} scores, got {}",
                rows * cols,
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Malformed(format!("score {s} outside [0, 1]")));
        }
        Ok(Self { frame, rows, cols, scores })
    }

    pub fn zeros(frame: u32, grid: &TileGrid) -> Self {
        Self { frame, rows: grid.rows, cols: grid.cols, scores: vec![0.0; grid.n_tiles()] }
    }

    pub fn get(&self, (i, j): Tile) -> f64 {
        self.scores[i * self.cols + j]
    }

    pub fn set(&mut self, (i, j): Tile, value: f64) {
        self.scores[i * self.cols + j] = value.clamp(0.0, 1.0);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

/// Boolean relevance per tile, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceMask {
    pub frame: u32,
    pub rows: usize,
    pub cols: usize,
    relevant: Vec<bool>,
}

impl RelevanceMask {
    pub fn new(frame: u32, rows: usize, cols: usize, relevant: Vec<bool>) -> Result<Self> {
        if relevant.len() != rows * cols {
            return Err(Error::GridMismatch(format!(
                "expected {} mask cells, got {}",
                rows * cols,
                relevant.len()
            )));
        }
        Ok(Self { frame, rows, cols, relevant })
    }

    pub fn empty(frame: u32, rows: usize, cols: usize) -> Self {
        Self { frame, rows, cols, relevant: vec![false; rows * cols] }
    }

    pub fn get(&self, (i, j): Tile) -> bool {
        self.relevant[i * self.cols + j]
    }

    pub fn set(&mut self, (i, j): Tile, value: bool) {
        self.relevant[i * self.cols + j] = value;
    }

    pub fn count(&self) -> usize {
        self.relevant.iter().filter(|r| **r).count()
    }

    pub fn relevant_tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        let cols = self.cols;
        self.relevant.iter().enumerate().filter(|(_, r)| **r).map(move |(k, _)| (k / cols, k % cols))
    }
}

/// Marks tiles with `score >= threshold` (inclusive) as relevant.
pub fn threshold_scores(scores: &ScoreMatrix, threshold: f64) -> RelevanceMask {
    RelevanceMask {
        frame: scores.frame,
        rows: scores.rows,
        cols: scores.cols,
        relevant: scores.scores.iter().map(|s| *s >= threshold).collect(),
    }
}

/// An edge-connected set of tiles from one frame.
///
/// Tiles are kept sorted row-major; `anchor` is the top-left corner of the
/// tile-space bounding box, which need not itself be a member tile.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PolyominoRepr", into = "PolyominoRepr")]
pub struct Polyomino {
    frame: u32,
    tiles: Vec<Tile>,
}

#[derive(Serialize, Deserialize)]
struct PolyominoRepr {
    frame: u32,
    tiles: Vec<[usize; 2]>,
}

impl TryFrom<PolyominoRepr> for Polyomino {
    type Error = Error;

    fn try_from(r: PolyominoRepr) -> Result<Self> {
        Polyomino::new(r.frame, r.tiles.into_iter().map(|[i, j]| (i, j)).collect())
    }
}

impl From<Polyomino> for PolyominoRepr {
    fn from(p: Polyomino) -> Self {
        PolyominoRepr { frame: p.frame, tiles: p.tiles.into_iter().map(|(i, j)| [i, j]).collect() }
    }
}

impl Polyomino {
    /// Validates that `tiles` is a nonempty, duplicate-free, 4-connected set.
    pub fn new(frame: u32, mut tiles: Vec<Tile>) -> Result<Self> {
        if tiles.is_empty() {
            return Err(Error::Malformed("polyomino has no tiles".into()));
        }
        tiles.sort_unstable();
        if tiles.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Malformed("polyomino has duplicate tiles".into()));
        }
        if !is_connected(&tiles) {
            return Err(Error::Malformed("polyomino is not edge-connected".into()));
        }
        Ok(Self { frame, tiles })
    }

    /// Skips validation; `tiles` must already be sorted and connected.
    pub(crate) fn from_sorted(frame: u32, tiles: Vec<Tile>) -> Self {
        debug_assert!(!tiles.is_empty());
        Self { frame, tiles }
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn size(&self) -> usize {
        self.tiles.len()
    }

    pub fn contains(&self, t: Tile) -> bool {
        self.tiles.binary_search(&t).is_ok()
    }

    pub fn anchor(&self) -> Tile {
        let min_row = self.tiles[0].0;
        let min_col = self.tiles.iter().map(|t| t.1).min().unwrap_or(0);
        (min_row, min_col)
    }

    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        let (r0, c0) = self.anchor();
        let r1 = self.tiles[self.tiles.len() - 1].0;
        let c1 = self.tiles.iter().map(|t| t.1).max().unwrap_or(0);
        (r0, c0, r1, c1)
    }

    pub fn height(&self) -> usize {
        let (r0, _, r1, _) = self.bbox();
        r1 - r0 + 1
    }

    pub fn width(&self) -> usize {
        let (_, c0, _, c1) = self.bbox();
        c1 - c0 + 1
    }
}

fn is_connected(sorted: &[Tile]) -> bool {
    let mut seen = vec![false; sorted.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(k) = queue.pop_front() {
        let (i, j) = sorted[k];
        for n in neighbors4((i, j)) {
            if let Ok(idx) = sorted.binary_search(&n) {
                if !seen[idx] {
                    seen[idx] = true;
                    reached += 1;
                    queue.push_back(idx);
                }
            }
        }
    }
    reached == sorted.len()
}

fn neighbors4((i, j): Tile) -> impl Iterator<Item = Tile> {
    let up = i.checked_sub(1).map(|i| (i, j));
    let left = j.checked_sub(1).map(|j| (i, j));
    [up, left, Some((i + 1, j)), Some((i, j + 1))].into_iter().flatten()
}

/// Groups relevant tiles into maximal 4-connected polyominoes.
///
/// Output is ordered by anchor (row, then col), ties broken by first member tile.
pub fn extract_polyominoes(mask: &RelevanceMask) -> Vec<Polyomino> {
    let (rows, cols) = (mask.rows, mask.cols);
    let mut label = vec![usize::MAX; rows * cols];
    let mut out = Vec::new();
    for start in 0..rows * cols {
        if !mask.relevant[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut tiles = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(k) = queue.pop_front() {
            let t = (k / cols, k % cols);
            tiles.push(t);
            for (ni, nj) in neighbors4(t) {
                if ni < rows && nj < cols {
                    let nk = ni * cols + nj;
                    if mask.relevant[nk] && label[nk] == usize::MAX {
                        label[nk] = id;
                        queue.push_back(nk);
                    }
                }
            }
        }
        tiles.sort_unstable();
        out.push(Polyomino::from_sorted(mask.frame, tiles));
    }
    out.sort_by_key(|p| (p.anchor(), p.tiles[0]));
    out
}

/// `(bbox_area - |p|) / |p|`, the extra area an axis-aligned window would cover.
pub fn window_overhead(p: &Polyomino) -> f64 {
    tile_set_overhead(p.tiles())
}

/// Window overhead of an arbitrary nonempty tile set.
pub fn tile_set_overhead(tiles: &[Tile]) -> f64 {
    let (r0, r1) = tiles.iter().fold((usize::MAX, 0), |(a, b), t| (a.min(t.0), b.max(t.0)));
    let (c0, c1) = tiles.iter().fold((usize::MAX, 0), |(a, b), t| (a.min(t.1), b.max(t.1)));
    let area = (r1 - r0 + 1) * (c1 - c0 + 1);
    (area - tiles.len()) as f64 / tiles.len() as f64
}

/// Tile padding knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingSpec {
    #[default]
    None,
    HalfTopLeft,
    HalfBottomRight,
    Full,
}

impl PaddingSpec {
    pub const ALL: [PaddingSpec; 4] =
        [PaddingSpec::None, PaddingSpec::HalfTopLeft, PaddingSpec::HalfBottomRight, PaddingSpec::Full];

    /// Pixel margins `(top, left, bottom, right)` for the given tile size.
    pub fn margins(self, tile_size: u32) -> (u32, u32, u32, u32) {
        let half = tile_size / 2;
        match self {
            PaddingSpec::None => (0, 0, 0, 0),
            PaddingSpec::HalfTopLeft => (half, half, 0, 0),
            PaddingSpec::HalfBottomRight => (0, 0, half, half),
            PaddingSpec::Full => (tile_size, tile_size, tile_size, tile_size),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PaddingSpec::None => "none",
            PaddingSpec::HalfTopLeft => "half-top-left",
            PaddingSpec::HalfBottomRight => "half-bottom-right",
            PaddingSpec::Full => "full",
        }
    }
}

impl std::fmt::Display for PaddingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PaddingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PaddingSpec::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown padding mode {s:?}")))
    }
}

/// A polyomino with its pixel padding applied.
///
/// `footprint` holds one clipped pixel rectangle per member tile; `occupancy`
/// is the set of tiles touched by the footprint and is what the packer places.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedPolyomino {
    pub source: Polyomino,
    pub footprint: Vec<PixelRect>,
    occupancy: Vec<Tile>,
}

impl PaddedPolyomino {
    pub fn frame(&self) -> u32 {
        self.source.frame()
    }

    pub fn occupancy(&self) -> &[Tile] {
        &self.occupancy
    }

    pub fn size(&self) -> usize {
        self.occupancy.len()
    }

    pub fn anchor(&self) -> Tile {
        let r0 = self.occupancy[0].0;
        let c0 = self.occupancy.iter().map(|t| t.1).min().unwrap_or(0);
        (r0, c0)
    }

    pub fn height(&self) -> usize {
        self.occupancy[self.occupancy.len() - 1].0 - self.occupancy[0].0 + 1
    }

    pub fn width(&self) -> usize {
        let c0 = self.occupancy.iter().map(|t| t.1).min().unwrap_or(0);
        let c1 = self.occupancy.iter().map(|t| t.1).max().unwrap_or(0);
        c1 - c0 + 1
    }

    pub fn occupies(&self, t: Tile) -> bool {
        self.occupancy.binary_search(&t).is_ok()
    }

    /// Unpadded polyomino as a padded one with zero margin.
    pub fn unpadded(p: &Polyomino, grid: &TileGrid) -> Self {
        pad_polyomino(p, PaddingSpec::None, grid)
    }
}

/// Expands every member tile by the padding margin, clipped to the frame.
pub fn pad_polyomino(p: &Polyomino, spec: PaddingSpec, grid: &TileGrid) -> PaddedPolyomino {
    let (top, left, bottom, right) = spec.margins(grid.tile_size);
    let ts = grid.tile_size;
    let mut footprint = Vec::with_capacity(p.size());
    let mut occupancy = Vec::new();
    for &t in p.tiles() {
        let r = grid.tile_rect(t);
        let rect = PixelRect::new(
            r.x0.saturating_sub(left),
            r.y0.saturating_sub(top),
            (r.x1 + right).min(grid.frame_width),
            (r.y1 + bottom).min(grid.frame_height),
        );
        for i in (rect.y0 / ts)..rect.y1.div_ceil(ts) {
            for j in (rect.x0 / ts)..rect.x1.div_ceil(ts) {
                occupancy.push((i as usize, j as usize));
            }
        }
        footprint.push(rect);
    }
    occupancy.sort_unstable();
    occupancy.dedup();
    PaddedPolyomino { source: p.clone(), footprint, occupancy }
}
