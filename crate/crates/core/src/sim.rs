//! Deterministic synthetic stationary-camera scenes.
//!
//! A [`Scenario`] describes rectangles moving along piecewise-linear waypoint
//! paths over a static textured background. Everything here is a pure
//! function of the scenario and explicit seeds: frames, ground-truth boxes,
//! the oracle canvas detector and the two relevance scorers.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::grid::{ScoreMatrix, Tile, TileGrid};
use crate::pack::RenderedCanvas;

/// A detected (or ground-truth) box on one frame.
///
/// Canvas-space detections produced by a detector carry `frame = 0`; the
/// source frame is only known after unpacking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<u32>,
    pub confidence: f64,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox) -> Self {
        Self { frame, bbox, object_id: None, confidence: 1.0 }
    }
}

/// Orders detections by box geometry, the canonical within-frame order fed to trackers.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        (a.bbox.x1, a.bbox.y1, a.bbox.x2, a.bbox.y2)
            .partial_cmp(&(b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// A `(frame, x, y)` waypoint; `x, y` is the top-left corner in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint(pub u32, pub f64, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub w: u32,
    pub h: u32,
    pub waypoints: Vec<Waypoint>,
}

impl ObjectSpec {
    pub fn first_frame(&self) -> u32 {
        self.waypoints.first().map_or(0, |w| w.0)
    }

    pub fn last_frame(&self) -> u32 {
        self.waypoints.last().map_or(0, |w| w.0)
    }

    /// Unclipped box at frame `f`, positions rounded to whole pixels.
    pub fn box_at(&self, f: u32) -> Option<BBox> {
        let wps = &self.waypoints;
        if wps.is_empty() || f < self.first_frame() || f > self.last_frame() {
            return None;
        }
        let k = wps.partition_point(|w| w.0 <= f);
        let (x, y) = if k == wps.len() {
            let w = wps[k - 1];
            (w.1, w.2)
        } else {
            let (a, b) = (wps[k - 1], wps[k]);
            let t = (f - a.0) as f64 / (b.0 - a.0) as f64;
            (a.1 + (b.1 - a.1) * t, a.2 + (b.2 - a.2) * t)
        };
        Some(BBox::from_xywh(x.round(), y.round(), self.w as f64, self.h as f64))
    }

    fn intensity(&self) -> u8 {
        150 + ((self.id.wrapping_mul(53)) % 100) as u8
    }
}

/// A synthetic video. Frames are numbered `1..=n_frames`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub frame_w: u32,
    pub frame_h: u32,
    pub tile_size: u32,
    pub n_frames: u32,
    pub fps: f64,
    pub objects: Vec<ObjectSpec>,
}

/// 8-bit single-channel frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn at(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }
}

impl Scenario {
    pub fn grid(&self) -> Result<TileGrid> {
        TileGrid::new(self.frame_w, self.frame_h, self.tile_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.n_frames == 0 {
            return Err(Error::InvalidScenario("n_frames must be at least 1".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::InvalidScenario("fps must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return Err(Error::InvalidScenario(format!("duplicate object id {}", o.id)));
            }
            if o.w == 0 || o.h == 0 {
                return Err(Error::InvalidScenario(format!("object {} has zero size", o.id)));
            }
            if o.waypoints.is_empty() {
                return Err(Error::InvalidScenario(format!("object {} has no waypoints", o.id)));
            }
            if o.waypoints.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidScenario(format!(
                    "object {} waypoints are not strictly increasing in frame",
                    o.id
                )));
            }
            if o.waypoints.iter().any(|w| !w.1.is_finite() || !w.2.is_finite()) {
                return Err(Error::InvalidScenario(format!("object {} has a non-finite waypoint", o.id)));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn frame_rect(&self) -> BBox {
        BBox::new(0.0, 0.0, self.frame_w as f64, self.frame_h as f64)
    }

    fn check_frame(&self, f: u32) -> Result<()> {
        if f == 0 || f > self.n_frames {
            return Err(Error::FrameOutOfRange { frame: f, n_frames: self.n_frames });
        }
        Ok(())
    }

    /// Static background intensity at a pixel.
    pub fn background(&self, x: u32, y: u32) -> u8 {
        let h = (x as u64)
            .wrapping_mul(7)
            .wrapping_add((y as u64).wrapping_mul(13))
            .wrapping_add(self.seed.wrapping_mul(31));
        40 + (h % 23) as u8
    }
}

/// Renders frame `f` (1-based).
pub fn synthesize_frame(scenario: &Scenario, f: u32) -> Result<Frame> {
    scenario.check_frame(f)?;
    let (w, h) = (scenario.frame_w, scenario.frame_h);
    let mut pixels = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            pixels.push(scenario.background(x, y));
        }
    }
    let frame_rect = scenario.frame_rect();
    for o in &scenario.objects {
        let Some(b) = o.box_at(f).and_then(|b| b.intersect(&frame_rect)) else { continue };
        let v = o.intensity();
        for y in b.y1 as u32..b.y2 as u32 {
            let row = (y * w) as usize;
            pixels[row + b.x1 as usize..row + b.x2 as usize].fill(v);
        }
    }
    Ok(Frame { index: f, width: w, height: h, pixels })
}

/// One detection per object present at `f`, clipped to the frame, ordered by object id.
pub fn ground_truth_boxes(scenario: &Scenario, f: u32) -> Vec<Detection> {
    let frame_rect = scenario.frame_rect();
    let mut out: Vec<Detection> = scenario
        .objects
        .iter()
        .filter_map(|o| {
            let b = o.box_at(f)?.intersect(&frame_rect)?;
            Some(Detection { frame: f, bbox: b, object_id: Some(o.id), confidence: 1.0 })
        })
        .collect();
    out.sort_by_key(|d| d.object_id);
    out
}

/// Tiles whose rectangle overlaps `b` with positive area.
pub fn tiles_overlapping(b: &BBox, grid: &TileGrid) -> Vec<Tile> {
    let ts = grid.tile_size as f64;
    let c0 = (b.x1 / ts).floor().max(0.0) as usize;
    let r0 = (b.y1 / ts).floor().max(0.0) as usize;
    let c1 = ((b.x2 / ts).ceil() as usize).min(grid.cols);
    let r1 = ((b.y2 / ts).ceil() as usize).min(grid.rows);
    let mut out = Vec::new();
    for i in r0..r1 {
        for j in c0..c1 {
            let r = grid.tile_rect((i, j));
            let tile = BBox::new(r.x0 as f64, r.y0 as f64, r.x1 as f64, r.y1 as f64);
            if b.intersect(&tile).is_some() {
                out.push((i, j));
            }
        }
    }
    out
}

/// 1.0 on tiles overlapped by any box, 0.0 elsewhere.
pub fn boxes_to_scores(frame: u32, boxes: &[BBox], grid: &TileGrid) -> ScoreMatrix {
    let mut m = ScoreMatrix::zeros(frame, grid);
    for b in boxes {
        for t in tiles_overlapping(b, grid) {
            m.set(t, 1.0);
        }
    }
    m
}

/// Detector-derived relevance labels: a tile is relevant when a ground-truth box overlaps it.
pub fn oracle_relevance(scenario: &Scenario, f: u32, grid: &TileGrid) -> Result<ScoreMatrix> {
    scenario.check_frame(f)?;
    let boxes: Vec<BBox> = ground_truth_boxes(scenario, f).iter().map(|d| d.bbox).collect();
    Ok(boxes_to_scores(f, &boxes, grid))
}

/// Hand-tuned stand-in for a learned relevance classifier: per-tile mean
/// absolute frame difference, scaled by a spatial prior, plus seeded noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionScorer {
    /// Mean absolute difference (in intensity levels) that maps to score 1.
    pub saturation: f64,
    /// Half-width of the uniform noise added to each score; 0 disables noise.
    pub noise_amplitude: f64,
}

impl Default for MotionScorer {
    fn default() -> Self {
        Self { saturation: 24.0, noise_amplitude: 0.0 }
    }
}

impl MotionScorer {
    /// Scores `cur` against `prev`; `prev = None` means no predecessor (zero difference).
    pub fn score(
        &self,
        prev: Option<&Frame>,
        cur: &Frame,
        grid: &TileGrid,
        prior: &[f64],
        noise_seed: u64,
    ) -> Result<ScoreMatrix> {
        if let Some(p) = prev {
            if p.width != cur.width || p.height != cur.height {
                return Err(Error::GridMismatch("frames differ in size".into()));
            }
        }
        if cur.width != grid.frame_width || cur.height != grid.frame_height {
            return Err(Error::GridMismatch("frame does not match grid".into()));
        }
        if prior.len() != grid.n_tiles() {
            return Err(Error::GridMismatch(format!(
                "prior has {} entries, grid has {} tiles",
                prior.len(),
                grid.n_tiles()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed ^ (cur.index as u64).wrapping_mul(0x9E37_79B9));
        let ts = grid.tile_size;
        let mut m = ScoreMatrix::zeros(cur.index, grid);
        for i in 0..grid.rows {
            for j in 0..grid.cols {
                let mut sum = 0u64;
                if let Some(p) = prev {
                    for y in i as u32 * ts..(i as u32 + 1) * ts {
                        for x in j as u32 * ts..(j as u32 + 1) * ts {
                            sum += p.at(x, y).abs_diff(cur.at(x, y)) as u64;
                        }
                    }
                }
                let mean = sum as f64 / (ts * ts) as f64;
                let noise = if self.noise_amplitude > 0.0 {
                    rng.gen_range(-self.noise_amplitude..=self.noise_amplitude)
                } else {
                    0.0
                };
                let s = mean / self.saturation * prior[i * grid.cols + j] + noise;
                m.set((i, j), s.clamp(0.0, 1.0));
            }
        }
        Ok(m)
    }
}

/// Free-function form of [`MotionScorer::score`] with default constants.
pub fn motion_relevance(
    prev: &Frame,
    cur: &Frame,
    grid: &TileGrid,
    prior: &[f64],
    noise_seed: u64,
) -> Result<ScoreMatrix> {
    MotionScorer::default().score(Some(prev), cur, grid, prior, noise_seed)
}

/// Oracle stand-in for the user's detector, run on a packed canvas.
///
/// Every ground-truth object whose box center lies in the rendered pixels of
/// some placement is reported once, translated into canvas coordinates and
/// clipped to that placement's rendered bounds.
pub fn oracle_detect_canvas(canvas: &RenderedCanvas, scenario: &Scenario) -> Vec<Detection> {
    let grid = canvas.grid;
    let mut claimed: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut out = Vec::new();
    // Preferred placement first: the one whose unpadded tiles hold the center.
    for pass in 0..2 {
        for pl in &canvas.canvas.placements {
            let Ok(gt) = scenario.check_frame(pl.frame).map(|_| ground_truth_boxes(scenario, pl.frame)) else {
                continue;
            };
            for d in gt {
                let id = d.object_id.unwrap_or(u32::MAX);
                if claimed.contains(&(pl.frame, id)) {
                    continue;
                }
                let (cx, cy) = d.bbox.center();
                if !pl.footprint.iter().any(|r| r.contains(cx, cy)) {
                    continue;
                }
                let in_source = grid.tile_at(cx, cy).is_some_and(|t| pl.source_tiles.binary_search(&t).is_ok());
                if pass == 0 && !in_source {
                    continue;
                }
                let (dx, dy) = pl.pixel_shift(&grid);
                let bounds = pl.canvas_bounds(&grid);
                let bounds = BBox::new(bounds.x0 as f64, bounds.y0 as f64, bounds.x1 as f64, bounds.y1 as f64);
                if let Some(b) = d.bbox.translate(dx as f64, dy as f64).intersect(&bounds) {
                    claimed.insert((pl.frame, id));
                    out.push(Detection { frame: 0, bbox: b, object_id: None, confidence: 1.0 });
                }
            }
        }
    }
    sort_detections(&mut out);
    out
}

/// Canonical scene families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Constant-velocity traffic in two opposing lanes.
    Highway,
    /// Stop-and-go approaches, steady exits.
    Intersection,
    /// A few small slow objects; at most ~5% of tiles relevant.
    Sparse,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "highway" => Ok(Preset::Highway),
            "intersection" => Ok(Preset::Intersection),
            "sparse" => Ok(Preset::Sparse),
            _ => Err(Error::InvalidScenario(format!("unknown preset {s:?}"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Highway => "highway",
            Preset::Intersection => "intersection",
            Preset::Sparse => "sparse",
        })
    }
}

pub const DEFAULT_FRAME_W: u32 = 128;
pub const DEFAULT_FRAME_H: u32 = 96;
pub const DEFAULT_TILE_SIZE: u32 = 16;
pub const DEFAULT_FPS: f64 = 15.0;

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Highway, Preset::Intersection, Preset::Sparse];

    /// Scenario on the default 128x96 frame with 16 px tiles.
    pub fn generate(self, seed: u64, n_frames: u32) -> Result<Scenario> {
        self.generate_with(seed, n_frames, DEFAULT_FRAME_W, DEFAULT_FRAME_H, DEFAULT_TILE_SIZE)
    }

    pub fn generate_with(
        self,
        seed: u64,
        n_frames: u32,
        frame_w: u32,
        frame_h: u32,
        tile_size: u32,
    ) -> Result<Scenario> {
        if n_frames == 0 {
            return Err(Error::InvalidScenario("n_frames must be at least 1".into()));
        }
        TileGrid::new(frame_w, frame_h, tile_size)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = match self {
            Preset::Highway => highway(&mut rng, n_frames, frame_w, frame_h),
            Preset::Intersection => intersection(&mut rng, n_frames, frame_w, frame_h),
            Preset::Sparse => sparse(&mut rng, n_frames, frame_w, frame_h),
        };
        let sc = Scenario { seed, frame_w, frame_h, tile_size, n_frames, fps: DEFAULT_FPS, objects };
        sc.validate()?;
        Ok(sc)
    }
}

const VEHICLE_W: u32 = 24;
const VEHICLE_H: u32 = 16;

/// Appends a waypoint reached from the previous one at `speed` px/frame.
fn drive(wps: &mut Vec<Waypoint>, x: f64, speed: f64) {
    let last = *wps.last().expect("path has a start");
    let dt = ((x - last.1).abs() / speed).ceil().max(1.0) as u32;
    wps.push(Waypoint(last.0 + dt, x, last.2));
}

fn hold(wps: &mut Vec<Waypoint>, frames: u32) {
    let last = *wps.last().expect("path has a start");
    wps.push(Waypoint(last.0 + frames, last.1, last.2));
}

/// Lane top y-coordinates (eastbound, westbound) for two-lane presets.
fn lanes(frame_h: u32) -> (f64, f64) {
    let h = frame_h as f64;
    let vh = VEHICLE_H as f64;
    ((h / 4.0 - vh / 2.0).round().max(0.0), (3.0 * h / 4.0 - vh / 2.0).round().min(h - vh))
}

fn highway(rng: &mut ChaCha8Rng, n_frames: u32, frame_w: u32, frame_h: u32) -> Vec<ObjectSpec> {
    let (east_y, west_y) = lanes(frame_h);
    let max_x = (frame_w - VEHICLE_W) as f64;
    let mut objects = Vec::new();
    let mut id = 1;
    for (lane_y, eastbound) in [(east_y, true), (west_y, false)] {
        let mut t = 1 + rng.gen_range(0..12);
        while t < n_frames {
            let speed = 2.0;
            let (x0, x1) = if eastbound { (0.0, max_x) } else { (max_x, 0.0) };
            let mut wps = vec![Waypoint(t, x0, lane_y)];
            drive(&mut wps, x1, speed);
            objects.push(ObjectSpec { id, w: VEHICLE_W, h: VEHICLE_H, waypoints: wps });
            id += 1;
            t += rng.gen_range(30..46);
        }
    }
    objects
}

fn intersection(rng: &mut ChaCha8Rng, n_frames: u32, frame_w: u32, frame_h: u32) -> Vec<ObjectSpec> {
    let (east_y, west_y) = lanes(frame_h);
    let w = frame_w as f64;
    let vw = VEHICLE_W as f64;
    let mid = w / 2.0;
    let mut objects = Vec::new();
    let mut id = 1;
    for (lane_y, eastbound) in [(east_y, true), (west_y, false)] {
        let mut t = 1 + rng.gen_range(0..10);
        while t < n_frames {
            let approach = rng.gen_range(5..=7) as f64;
            let exit = rng.gen_range(2..=3) as f64;
            // Positions along the direction of travel, measured from the entry edge.
            let stop_line = mid - vw - 2.0;
            let creep = (stop_line / 2.0).round();
            let crossed = mid - vw / 2.0;
            let end = w - vw;
            let to_x = |d: f64| if eastbound { d } else { w - vw - d };
            let mut wps = vec![Waypoint(t, to_x(0.0), lane_y)];
            drive(&mut wps, to_x(creep), approach);
            hold(&mut wps, rng.gen_range(3..=5));
            drive(&mut wps, to_x(stop_line), approach);
            hold(&mut wps, rng.gen_range(6..=10));
            drive(&mut wps, to_x(crossed), approach);
            drive(&mut wps, to_x(end), exit);
            let last = wps.last().map_or(t, |p| p.0);
            objects.push(ObjectSpec { id, w: VEHICLE_W, h: VEHICLE_H, waypoints: wps });
            id += 1;
            t = last.saturating_sub(rng.gen_range(10..16)).max(t + 1);
        }
    }
    objects
}

fn sparse(rng: &mut ChaCha8Rng, n_frames: u32, frame_w: u32, frame_h: u32) -> Vec<ObjectSpec> {
    let size = 12u32;
    let mut objects = Vec::new();
    let mut id = 1;
    let mut t = 1 + rng.gen_range(0..8);
    while t < n_frames {
        let y = rng.gen_range(0..=(frame_h - size)) as f64;
        let x0 = rng.gen_range(0..=(frame_w - size) / 4) as f64;
        let x1 = (x0 + rng.gen_range(16..=40) as f64).min((frame_w - size) as f64);
        let mut wps = vec![Waypoint(t, x0, y)];
        drive(&mut wps, x1, 1.0);
        let last = wps.last().map_or(t, |p| p.0);
        objects.push(ObjectSpec { id, w: size, h: size, waypoints: wps });
        id += 1;
        t = last + rng.gen_range(20..40);
    }
    objects
}

/// Tiles visited by object centers before (approach) and after (exit) they
/// cross the vertical midline, for the two-lane presets. Tiles visited in
/// both phases are excluded from both sets.
pub fn approach_exit_regions(scenario: &Scenario) -> Result<(BTreeSet<Tile>, BTreeSet<Tile>)> {
    let grid = scenario.grid()?;
    let mid = scenario.frame_w as f64 / 2.0;
    let mut approach = BTreeSet::new();
    let mut exit = BTreeSet::new();
    for o in &scenario.objects {
        let eastbound = o.waypoints.last().map(|w| w.1) >= o.waypoints.first().map(|w| w.1);
        for f in o.first_frame()..=o.last_frame().min(scenario.n_frames) {
            let Some(b) = o.box_at(f) else { continue };
            let (cx, cy) = b.center();
            let Some(t) = grid.tile_at(cx, cy) else { continue };
            let before = if eastbound { cx < mid } else { cx >= mid };
            if before {
                approach.insert(t);
            } else {
                exit.insert(t);
            }
        }
    }
    let both: Vec<Tile> = approach.intersection(&exit).copied().collect();
    for t in both {
        approach.remove(&t);
        exit.remove(&t);
    }
    Ok((approach, exit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_object(waypoints: Vec<Waypoint>, w: u32, h: u32) -> Scenario {
        Scenario {
            seed: 3,
            frame_w: 64,
            frame_h: 64,
            tile_size: 16,
            n_frames: 10,
            fps: 15.0,
            objects: vec![ObjectSpec { id: 1, w, h, waypoints }],
        }
    }

    #[test]
    fn empty_scene_is_static_background() {
        let mut sc = one_object(vec![Waypoint(1, 0.0, 0.0)], 4, 4);
        sc.objects.clear();
        let f1 = synthesize_frame(&sc, 1).unwrap();
        let f7 = synthesize_frame(&sc, 7).unwrap();
        assert_eq!(f1.pixels, f7.pixels);
        assert!(ground_truth_boxes(&sc, 4).is_empty());
        let grid = sc.grid().unwrap();
        assert!(oracle_relevance(&sc, 2, &grid).unwrap().as_slice().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn frame_range_checked() {
        let sc = one_object(vec![Waypoint(1, 0.0, 0.0)], 4, 4);
        assert!(matches!(synthesize_frame(&sc, 0), Err(Error::FrameOutOfRange { .. })));
        assert!(synthesize_frame(&sc, 11).is_err());
        assert_eq!(synthesize_frame(&sc, 3).unwrap(), synthesize_frame(&sc, 3).unwrap());
    }

    #[test]
    fn midpoint_interpolation() {
        let sc = one_object(vec![Waypoint(1, 0.0, 10.0), Waypoint(5, 20.0, 30.0)], 8, 8);
        let b = ground_truth_boxes(&sc, 3)[0].bbox;
        assert_eq!(b, BBox::new(10.0, 20.0, 18.0, 28.0));
        let f = synthesize_frame(&sc, 3).unwrap();
        assert_eq!(f.at(10, 20), sc.objects[0].intensity());
        assert_eq!(f.at(9, 20), sc.background(9, 20));
    }

    #[test]
    fn static_object_keeps_its_box() {
        let sc = one_object(vec![Waypoint(1, 5.0, 5.0), Waypoint(10, 5.0, 5.0)], 8, 8);
        let boxes: Vec<BBox> = (1..=10).map(|f| ground_truth_boxes(&sc, f)[0].bbox).collect();
        assert!(boxes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn boxes_clip_at_frame_edge() {
        let sc = one_object(vec![Waypoint(1, 60.0, -4.0)], 10, 10);
        let d = ground_truth_boxes(&sc, 1)[0];
        assert_eq!(d.bbox, BBox::new(60.0, 0.0, 64.0, 6.0));
        assert_eq!(d.object_id, Some(1));
    }

    #[test]
    fn oracle_relevance_overlap_rule() {
        let sc = one_object(vec![Waypoint(1, 16.0, 16.0)], 16, 16);
        let grid = sc.grid().unwrap();
        let m = oracle_relevance(&sc, 1, &grid).unwrap();
        assert_eq!(m.as_slice().iter().filter(|s| **s == 1.0).count(), 1);
        assert_eq!(m.get((1, 1)), 1.0);

        let sc = one_object(vec![Waypoint(1, 15.0, 15.0)], 2, 2);
        let m = oracle_relevance(&sc, 1, &grid).unwrap();
        for t in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(m.get(t), 1.0);
        }
        assert_eq!(m.as_slice().iter().filter(|s| **s == 1.0).count(), 4);
    }

    #[test]
    fn motion_scorer_cases() {
        let sc = one_object(vec![Waypoint(1, 0.0, 0.0), Waypoint(9, 32.0, 0.0)], 16, 16);
        let grid = sc.grid().unwrap();
        let f1 = synthesize_frame(&sc, 1).unwrap();
        let f2 = synthesize_frame(&sc, 2).unwrap();
        let ones = vec![1.0; grid.n_tiles()];
        let still = motion_relevance(&f1, &f1, &grid, &ones, 0).unwrap();
        assert!(still.as_slice().iter().all(|s| *s == 0.0));

        let scorer = MotionScorer { saturation: 1.0, noise_amplitude: 0.0 };
        let moving = scorer.score(Some(&f1), &f2, &grid, &ones, 0).unwrap();
        assert_eq!(moving.get((0, 0)), 1.0);
        assert_eq!(moving.get((3, 3)), 0.0);

        let mut prior = ones.clone();
        prior[0] = 0.0;
        let masked = scorer.score(Some(&f1), &f2, &grid, &prior, 0).unwrap();
        assert_eq!(masked.get((0, 0)), 0.0);

        let first = scorer.score(None, &f2, &grid, &ones, 0).unwrap();
        assert!(first.as_slice().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn motion_noise_is_seeded() {
        let sc = one_object(vec![Waypoint(1, 0.0, 0.0)], 4, 4);
        let grid = sc.grid().unwrap();
        let f1 = synthesize_frame(&sc, 1).unwrap();
        let scorer = MotionScorer { saturation: 24.0, noise_amplitude: 0.2 };
        let ones = vec![1.0; grid.n_tiles()];
        let a = scorer.score(Some(&f1), &f1, &grid, &ones, 7).unwrap();
        let b = scorer.score(Some(&f1), &f1, &grid, &ones, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|s| (0.0..=0.2).contains(s)));
    }

    #[test]
    fn presets_are_deterministic_and_valid() {
        for p in Preset::ALL {
            let a = p.generate(11, 150).unwrap();
            let b = p.generate(11, 150).unwrap();
            assert_eq!(a, b);
            assert!(!a.objects.is_empty());
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(Scenario::from_json(&json).unwrap(), a);
        }
        assert!(Preset::Sparse.generate(1, 0).is_err());
    }

    #[test]
    fn scenario_json_rejects_bad_waypoints() {
        let bad = r#"{"seed":1,"frame_w":64,"frame_h":64,"tile_size":16,"n_frames":5,"fps":15,
            "objects":[{"id":1,"w":4,"h":4,"waypoints":[[3,0,0],[2,1,1]]}]}"#;
        assert!(Scenario::from_json(bad).is_err());
        let bad_grid = r#"{"seed":1,"frame_w":60,"frame_h":64,"tile_size":16,"n_frames":5,"fps":15,"objects":[]}"#;
        assert!(Scenario::from_json(bad_grid).is_err());
    }
}
