//! First-fit-descending packing of polyominoes into frame-sized canvases,
//! canvas rendering and unpacking of canvas detections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PaddedPolyomino, PixelRect, Tile, TileGrid};
use crate::sim::{sort_detections, Detection, Frame};

/// A polyomino queued for packing, with its index inside its frame's list.
#[derive(Debug, Clone)]
pub struct PackItem {
    pub poly_index: usize,
    pub poly: PaddedPolyomino,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub frame: u32,
    pub poly_index: usize,
    /// Global placement sequence number.
    pub order: usize,
    /// Unpadded member tiles, frame space, sorted.
    pub source_tiles: Vec<Tile>,
    /// Padded occupancy, frame space, sorted.
    pub occupancy: Vec<Tile>,
    pub anchor: Tile,
    pub offset: Tile,
    /// Pixel rectangles to copy, frame space.
    pub footprint: Vec<PixelRect>,
}

impl Placement {
    fn to_canvas(&self, (i, j): Tile) -> Tile {
        (i - self.anchor.0 + self.offset.0, j - self.anchor.1 + self.offset.1)
    }

    fn to_frame(&self, (i, j): Tile) -> Option<Tile> {
        let i = (i + self.anchor.0).checked_sub(self.offset.0)?;
        let j = (j + self.anchor.1).checked_sub(self.offset.1)?;
        Some((i, j))
    }

    /// Canvas tiles covered by this placement.
    pub fn canvas_tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        self.occupancy.iter().map(|&t| self.to_canvas(t))
    }

    /// Pixel translation `(dx, dy)` from frame space to canvas space.
    pub fn pixel_shift(&self, grid: &TileGrid) -> (i64, i64) {
        let ts = grid.tile_size as i64;
        (
            (self.offset.1 as i64 - self.anchor.1 as i64) * ts,
            (self.offset.0 as i64 - self.anchor.0 as i64) * ts,
        )
    }

    /// Bounding rectangle of the rendered footprint in canvas pixels.
    pub fn canvas_bounds(&self, grid: &TileGrid) -> PixelRect {
        let (dx, dy) = self.pixel_shift(grid);
        let x0 = self.footprint.iter().map(|r| r.x0).min().unwrap_or(0) as i64 + dx;
        let y0 = self.footprint.iter().map(|r| r.y0).min().unwrap_or(0) as i64 + dy;
        let x1 = self.footprint.iter().map(|r| r.x1).max().unwrap_or(0) as i64 + dx;
        let y1 = self.footprint.iter().map(|r| r.y1).max().unwrap_or(0) as i64 + dy;
        PixelRect::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32)
    }
}

/// One detector input: an `rows` x `cols` tile occupancy grid with placements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub id: usize,
    pub rows: usize,
    pub cols: usize,
    occupancy: Vec<bool>,
    pub placements: Vec<Placement>,
}

impl Canvas {
    fn new(id: usize, rows: usize, cols: usize) -> Self {
        Self { id, rows, cols, occupancy: vec![false; rows * cols], placements: Vec::new() }
    }

    pub fn is_occupied(&self, (i, j): Tile) -> bool {
        self.occupancy[i * self.cols + j]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    fn can_place_at(&self, shape: &[Tile], (oi, oj): Tile) -> bool {
        shape.iter().all(|&(i, j)| {
            let (ci, cj) = (i + oi, j + oj);
            ci < self.rows && cj < self.cols && !self.occupancy[ci * self.cols + cj]
        })
    }

    fn try_place(&self, shape: &[Tile], h: usize, w: usize, attempts: &mut u64) -> Option<Tile> {
        if h > self.rows || w > self.cols {
            return None;
        }
        for i in 0..=self.rows - h {
            for j in 0..=self.cols - w {
                *attempts += 1;
                if self.can_place_at(shape, (i, j)) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn mark(&mut self, shape: &[Tile], (oi, oj): Tile) {
        for &(i, j) in shape {
            self.occupancy[(i + oi) * self.cols + (j + oj)] = true;
        }
    }

    pub fn manifest(&self) -> CanvasManifest {
        CanvasManifest {
            canvas_id: self.id,
            placements: self
                .placements
                .iter()
                .map(|p| ManifestPlacement { frame: p.frame, poly_index: p.poly_index, offset: [p.offset.0, p.offset.1] })
                .collect(),
        }
    }
}

/// Packing result plus the number of `canPlaceAt` probes it took.
#[derive(Debug, Clone)]
pub struct Packing {
    pub canvases: Vec<Canvas>,
    pub attempts: u64,
}

/// First-fit-descending packing.
///
/// Items are sorted by padded size descending (ties by frame, then index);
/// each goes to the first canvas, in creation order, that has a free
/// row-major offset, otherwise to `(0, 0)` of a new canvas.
pub fn pack(items: &[PackItem], rows: usize, cols: usize) -> Vec<Canvas> {
    pack_with_stats(items, rows, cols).canvases
}

pub fn pack_with_stats(items: &[PackItem], rows: usize, cols: usize) -> Packing {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&k| {
        let it = &items[k];
        (std::cmp::Reverse(it.poly.size()), it.poly.frame(), it.poly_index)
    });
    let mut canvases: Vec<Canvas> = Vec::new();
    let mut attempts = 0u64;
    for (seq, k) in order.into_iter().enumerate() {
        let item = &items[k];
        let anchor = item.poly.anchor();
        let shape: Vec<Tile> = item.poly.occupancy().iter().map(|&(i, j)| (i - anchor.0, j - anchor.1)).collect();
        let (h, w) = (item.poly.height(), item.poly.width());
        let mut target = None;
        for (ci, c) in canvases.iter().enumerate() {
            if let Some(pos) = c.try_place(&shape, h, w, &mut attempts) {
                target = Some((ci, pos));
                break;
            }
        }
        let (ci, pos) = target.unwrap_or_else(|| {
            canvases.push(Canvas::new(canvases.len(), rows, cols));
            (canvases.len() - 1, (0, 0))
        });
        let canvas = &mut canvases[ci];
        canvas.mark(&shape, pos);
        canvas.placements.push(Placement {
            frame: item.poly.frame(),
            poly_index: item.poly_index,
            order: seq,
            source_tiles: item.poly.source.tiles().to_vec(),
            occupancy: item.poly.occupancy().to_vec(),
            anchor,
            offset: pos,
            footprint: item.poly.footprint.clone(),
        });
    }
    Packing { canvases, attempts }
}

/// Occupied tile-cells over total canvas tile-cells.
pub fn packing_efficacy(canvases: &[Canvas]) -> Result<f64> {
    if canvases.is_empty() {
        return Err(Error::Empty("packing efficacy needs at least one canvas"));
    }
    let total: usize = canvases.iter().map(|c| c.rows * c.cols).sum();
    let used: usize = canvases.iter().map(Canvas::occupied_count).sum();
    Ok(used as f64 / total as f64)
}

/// A canvas with its pixel content.
#[derive(Debug, Clone)]
pub struct RenderedCanvas {
    pub canvas: Canvas,
    pub grid: TileGrid,
    pub pixels: Vec<u8>,
}

/// Copies every placement's footprint from its source frame into the canvas;
/// pixels outside all placements stay zero.
pub fn render(canvas: &Canvas, grid: &TileGrid, frames: &BTreeMap<u32, Frame>) -> Result<RenderedCanvas> {
    let (w, h) = (grid.frame_width as usize, grid.frame_height as usize);
    let mut pixels = vec![0u8; w * h];
    for pl in &canvas.placements {
        let src = frames.get(&pl.frame).ok_or(Error::MissingFrame(pl.frame))?;
        if src.width != grid.frame_width || src.height != grid.frame_height {
            return Err(Error::GridMismatch(format!("frame {} does not match grid", pl.frame)));
        }
        let (dx, dy) = pl.pixel_shift(grid);
        for r in &pl.footprint {
            let len = (r.x1 - r.x0) as usize;
            for y in r.y0..r.y1 {
                let s = y as usize * w + r.x0 as usize;
                let ty = (y as i64 + dy) as usize;
                let d = ty * w + (r.x0 as i64 + dx) as usize;
                pixels[d..d + len].copy_from_slice(&src.pixels[s..s + len]);
            }
        }
    }
    Ok(RenderedCanvas { canvas: canvas.clone(), grid: *grid, pixels })
}

/// Maps canvas-space detections back to their source frames.
///
/// The placement is chosen by the tile holding the box center: unpadded
/// member tiles win over padded occupancy, then earliest placement. Boxes
/// centred on unoccupied tiles are dropped.
pub fn unpack(detections: &[Detection], canvas: &Canvas, grid: &TileGrid) -> Vec<Detection> {
    let mut out = Vec::new();
    for d in detections {
        let (cx, cy) = d.bbox.center();
        let Some(t) = grid.tile_at(cx, cy) else { continue };
        let by_source = canvas
            .placements
            .iter()
            .find(|p| p.to_frame(t).is_some_and(|ft| p.source_tiles.binary_search(&ft).is_ok()));
        let chosen = by_source.or_else(|| {
            canvas.placements.iter().find(|p| p.to_frame(t).is_some_and(|ft| p.occupancy.binary_search(&ft).is_ok()))
        });
        let Some(pl) = chosen else { continue };
        let (dx, dy) = pl.pixel_shift(grid);
        out.push(Detection {
            frame: pl.frame,
            bbox: d.bbox.translate(-dx as f64, -dy as f64),
            object_id: d.object_id,
            confidence: d.confidence,
        });
    }
    out
}

/// Groups detections by frame in canonical order.
pub fn group_by_frame(dets: Vec<Detection>) -> BTreeMap<u32, Vec<Detection>> {
    let mut m: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        m.entry(d.frame).or_default().push(d);
    }
    for v in m.values_mut() {
        sort_detections(v);
        v.dedup_by(|a, b| a.bbox.key() == b.bbox.key());
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPlacement {
    pub frame: u32,
    pub poly_index: usize,
    pub offset: [usize; 2],
}

/// Serializable summary of a canvas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasManifest {
    pub canvas_id: usize,
    pub placements: Vec<ManifestPlacement>,
}

impl CanvasManifest {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Sidecar header for a raw 8-bit grayscale canvas buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub canvas_id: usize,
    pub width: u32,
    pub height: u32,
    pub format: String,
}

pub const RAW_FORMAT: &str = "gray8";

impl RenderedCanvas {
    pub fn raw_header(&self) -> RawHeader {
        RawHeader {
            canvas_id: self.canvas.id,
            width: self.grid.frame_width,
            height: self.grid.frame_height,
            format: RAW_FORMAT.to_string(),
        }
    }
}

/// Parses a sidecar header and checks the buffer length against it.
pub fn decode_raw(header_json: &str, bytes: &[u8]) -> Result<RawHeader> {
    let h: RawHeader = serde_json::from_str(header_json)?;
    if h.format != RAW_FORMAT {
        return Err(Error::Malformed(format!("unsupported raw format {:?}", h.format)));
    }
    let expect = (h.width as u64).checked_mul(h.height as u64);
    if expect != Some(bytes.len() as u64) {
        return Err(Error::Malformed(format!(
            "buffer has {} bytes, header says {}x{}",
            bytes.len(),
            h.width,
            h.height
        )));
    }
    Ok(h)
}
