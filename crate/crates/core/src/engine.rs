//! End-to-end extraction pipeline: sample frames, score and threshold tiles,
//! prune, pad, pack, detect on canvases, unpack and track.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::gaps::{GapMatrix, GapSet};
use crate::grid::{extract_polyominoes, pad_polyomino, threshold_scores, PaddingSpec, Polyomino, TileGrid};
use crate::pack::{group_by_frame, pack_with_stats, render, unpack, PackItem};
use crate::prune::{prune_windowed, WindowedPruner};
use crate::sim::{
    boxes_to_scores, ground_truth_boxes, oracle_detect_canvas, oracle_relevance, synthesize_frame, Detection, Frame,
    MotionScorer, Scenario,
};
use crate::tracker::{run_tracker, Track, TrackerConfig, TrackerKind};

/// Modeled detector latency per canvas, seconds.
pub const DETECTOR_COST_S: f64 = 0.05;
/// Modeled relevance-scoring latency per retained frame, seconds.
pub const CLASSIFIER_COST_S: f64 = 0.002;

pub const SAMPLING_RATES: [u32; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Ground-truth tile overlap.
    #[default]
    Oracle,
    /// Frame-difference heuristic.
    Motion,
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(ScorerKind::Oracle),
            "motion" => Ok(ScorerKind::Motion),
            _ => Err(Error::InvalidConfig(format!("unknown scorer {s:?}"))),
        }
    }
}

mod tolerance_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Word("none".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "none" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("expected a number or \"none\", got {w:?}"))),
        }
    }
}

/// Pipeline knobs; JSON keys follow the usual parameter names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Process every `s`-th frame.
    #[serde(rename = "s")]
    pub sample_every: u32,
    #[serde(rename = "T_r")]
    pub relevance_threshold: f64,
    /// Mistrack tolerance; `None` disables pruning.
    #[serde(rename = "M_bar", with = "tolerance_serde")]
    pub tolerance: Option<f64>,
    pub padding: PaddingSpec,
    pub tracker: TrackerKind,
    /// Retained frames per pruning and packing window.
    #[serde(rename = "window_N", default = "default_window")]
    pub window: u32,
    #[serde(default)]
    pub gammas: GapSet,
    #[serde(default)]
    pub scorer: ScorerKind,
    #[serde(default)]
    pub tracker_config: TrackerConfig,
    /// Seed for the motion scorer's noise.
    #[serde(default)]
    pub seed: u64,
}

fn default_window() -> u32 {
    16
}

impl Default for Config {
    /// Full-frame, every-frame processing.
    fn default() -> Self {
        Self {
            sample_every: 1,
            relevance_threshold: 0.0,
            tolerance: None,
            padding: PaddingSpec::None,
            tracker: TrackerKind::Sort,
            window: default_window(),
            gammas: GapSet::default(),
            scorer: ScorerKind::Oracle,
            tracker_config: TrackerConfig::default(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !SAMPLING_RATES.contains(&self.sample_every) {
            return Err(Error::InvalidConfig(format!("s must be one of {SAMPLING_RATES:?}")));
        }
        if !(0.0..=1.0).contains(&self.relevance_threshold) {
            return Err(Error::InvalidConfig("T_r must lie in [0,1]".into()));
        }
        if let Some(t) = self.tolerance {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig("M_bar must lie in [0,1] or be \"none\"".into()));
            }
        }
        if self.window < self.gammas.max() {
            return Err(Error::InvalidConfig(format!(
                "window_N {} is shorter than the largest gap {}",
                self.window,
                self.gammas.max()
            )));
        }
        self.tracker_config.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    /// Short label, e.g. `s=2 T_r=0.5 M_bar=0.6 P=full A=sort`.
    pub fn label(&self) -> String {
        let m = self.tolerance.map_or("none".to_string(), |t| t.to_string());
        format!(
            "s={} T_r={} M_bar={} P={} A={}",
            self.sample_every, self.relevance_threshold, m, self.padding, self.tracker
        )
    }
}

/// Wall-clock seconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub classify: f64,
    pub prune: f64,
    pub pack: f64,
    pub detect: f64,
    pub track: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.classify + self.prune + self.pack + self.detect + self.track
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: Config,
    /// Source frames in the video.
    pub frames: u32,
    pub retained_frames: u32,
    /// Canvases sent to the detector.
    pub detector_calls: u32,
    pub tiles_total: usize,
    pub tiles_selected: usize,
    pub polyominoes_total: usize,
    pub polyominoes_selected: usize,
    pub packing_attempts: u64,
    /// False if some pruning window fell back to a greedy cover.
    pub pruning_optimal: bool,
    /// Source frames per modeled second.
    pub throughput_fps: f64,
    pub modeled_seconds: f64,
    pub wall: StageTimes,
    #[serde(skip)]
    pub tracks: Vec<Track>,
}

impl RunReport {
    pub fn pruning_ratio(&self) -> f64 {
        if self.tiles_total == 0 {
            0.0
        } else {
            1.0 - self.tiles_selected as f64 / self.tiles_total as f64
        }
    }

    /// Same report with wall-clock fields zeroed.
    pub fn without_timing(&self) -> RunReport {
        RunReport { wall: StageTimes::default(), ..self.clone() }
    }
}

/// Modeled seconds to process a run.
pub fn modeled_seconds(detector_calls: u32, retained_frames: u32) -> f64 {
    detector_calls as f64 * DETECTOR_COST_S + retained_frames as f64 * CLASSIFIER_COST_S
}

/// Frames kept by whole-frame sampling: `1, 1+s, 1+2s, …`.
pub fn retained_frames(n_frames: u32, s: u32) -> Vec<u32> {
    (1..=n_frames).step_by(s.max(1) as usize).collect()
}

/// Gaps measured at native rate, expressed in retained frames.
pub fn scale_gaps(gaps: &GapMatrix, s: u32) -> Vec<Vec<u32>> {
    gaps.gaps.iter().map(|r| r.iter().map(|g| (g / s).max(1)).collect()).collect()
}

fn check_gaps(cfg: &Config, gaps: Option<&GapMatrix>, grid: &TileGrid) -> Result<Option<Vec<Vec<u32>>>> {
    let Some(_) = cfg.tolerance else { return Ok(None) };
    let g = gaps.ok_or_else(|| Error::InvalidConfig("M_bar is set but no gap matrix was given".into()))?;
    g.validate()?;
    if g.rows() != grid.rows || g.cols() != grid.cols {
        return Err(Error::GridMismatch(format!(
            "gap matrix is {}x{}, grid is {}x{}",
            g.rows(),
            g.cols(),
            grid.rows,
            grid.cols
        )));
    }
    if let Some(k) = g.tracker {
        if k != cfg.tracker {
            return Err(Error::InvalidConfig(format!("gaps were learned for tracker {k}, config uses {}", cfg.tracker)));
        }
    }
    Ok(Some(scale_gaps(g, cfg.sample_every)))
}

fn with_frame(p: &Polyomino, frame: u32) -> Polyomino {
    Polyomino::from_sorted(frame, p.tiles().to_vec())
}

/// Runs the pipeline on a simulated video.
pub fn run(scenario: &Scenario, cfg: &Config, gaps: Option<&GapMatrix>) -> Result<RunReport> {
    cfg.validate()?;
    scenario.validate()?;
    let grid = scenario.grid()?;
    let scaled = check_gaps(cfg, gaps, &grid)?;
    let retained = retained_frames(scenario.n_frames, cfg.sample_every);
    let mut pruner = scaled.map(|g| WindowedPruner::new(g, 1, retained.len() as u32));
    let scorer = MotionScorer::default();
    let prior = vec![1.0; grid.n_tiles()];

    let mut wall = StageTimes::default();
    let mut prev: Option<Frame> = None;
    let mut detections: Vec<Detection> = Vec::new();
    let (mut tiles_total, mut tiles_selected) = (0usize, 0usize);
    let (mut polys_total, mut polys_selected) = (0usize, 0usize);
    let (mut calls, mut attempts) = (0u32, 0u64);

    for (w, chunk) in retained.chunks(cfg.window as usize).enumerate() {
        // retained index of chunk[k] is base + k
        let base = (w * cfg.window as usize) as u32 + 1;

        let t0 = Instant::now();
        let mut frames: BTreeMap<u32, Frame> = BTreeMap::new();
        let mut polys: BTreeMap<u32, Vec<Polyomino>> = BTreeMap::new();
        for (k, &f) in chunk.iter().enumerate() {
            let frame = synthesize_frame(scenario, f)?;
            let scores = match cfg.scorer {
                ScorerKind::Oracle => oracle_relevance(scenario, f, &grid)?,
                ScorerKind::Motion => scorer.score(prev.as_ref(), &frame, &grid, &prior, cfg.seed)?,
            };
            let ps = extract_polyominoes(&threshold_scores(&scores, cfg.relevance_threshold));
            polys_total += ps.len();
            tiles_total += ps.iter().map(Polyomino::size).sum::<usize>();
            polys.insert(base + k as u32, ps.iter().map(|p| with_frame(p, base + k as u32)).collect());
            if cfg.scorer == ScorerKind::Motion {
                prev = Some(frame.clone());
            }
            frames.insert(f, frame);
        }
        wall.classify += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let chosen: Vec<(u32, usize)> = match pruner.as_mut() {
            Some(p) => p.solve_window(base, base + chunk.len() as u32 - 1, &polys)?,
            None => polys.iter().flat_map(|(f, ps)| (0..ps.len()).map(move |k| (*f, k))).collect(),
        };
        wall.prune += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let mut items = Vec::with_capacity(chosen.len());
        for &(r, k) in &chosen {
            let p = &polys[&r][k];
            polys_selected += 1;
            tiles_selected += p.size();
            let source = with_frame(p, chunk[(r - base) as usize]);
            items.push(PackItem { poly_index: k, poly: pad_polyomino(&source, cfg.padding, &grid) });
        }
        let packing = pack_with_stats(&items, grid.rows, grid.cols);
        attempts += packing.attempts;
        calls += packing.canvases.len() as u32;
        wall.pack += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        for canvas in &packing.canvases {
            let rendered = render(canvas, &grid, &frames)?;
            let found = oracle_detect_canvas(&rendered, scenario);
            detections.extend(unpack(&found, canvas, &grid));
        }
        wall.detect += t0.elapsed().as_secs_f64();
    }

    let t0 = Instant::now();
    let by_frame = group_by_frame(detections);
    let tracks = track_frames(cfg.tracker, cfg.tracker_config, &retained, &by_frame)?;
    wall.track += t0.elapsed().as_secs_f64();

    let n_retained = retained.len() as u32;
    let modeled = modeled_seconds(calls, n_retained);
    Ok(RunReport {
        config: cfg.clone(),
        frames: scenario.n_frames,
        retained_frames: n_retained,
        detector_calls: calls,
        tiles_total,
        tiles_selected,
        polyominoes_total: polys_total,
        polyominoes_selected: polys_selected,
        packing_attempts: attempts,
        pruning_optimal: pruner.as_ref().is_none_or(WindowedPruner::all_optimal),
        throughput_fps: scenario.n_frames as f64 / modeled,
        modeled_seconds: modeled,
        wall,
        tracks,
    })
}

/// Steps a fresh tracker through every listed frame, empty or not.
pub fn track_frames(
    kind: TrackerKind,
    cfg: TrackerConfig,
    frames: &[u32],
    detections: &BTreeMap<u32, Vec<Detection>>,
) -> Result<Vec<Track>> {
    let mut t = kind.build(cfg);
    let empty: Vec<Detection> = Vec::new();
    run_tracker(t.as_mut(), frames.iter().map(|f| (*f, detections.get(f).unwrap_or(&empty).as_slice())))
}

/// Full-frame, every-frame detection and tracking.
pub fn reference_run(scenario: &Scenario, kind: TrackerKind, cfg: TrackerConfig) -> Result<Vec<Track>> {
    Ok(reference_detections_and_tracks(scenario, kind, cfg)?.1)
}

/// Reference detections per frame along with the tracks built from them.
pub fn reference_detections_and_tracks(
    scenario: &Scenario,
    kind: TrackerKind,
    cfg: TrackerConfig,
) -> Result<(BTreeMap<u32, Vec<Detection>>, Vec<Track>)> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let whole: Vec<_> = (0..grid.rows).flat_map(|i| (0..grid.cols).map(move |j| (i, j))).collect();
    let mut by_frame = BTreeMap::new();
    for f in 1..=scenario.n_frames {
        let frame = synthesize_frame(scenario, f)?;
        let poly = Polyomino::new(f, whole.clone())?;
        let item = PackItem { poly_index: 0, poly: pad_polyomino(&poly, PaddingSpec::None, &grid) };
        let canvases = pack_with_stats(&[item], grid.rows, grid.cols).canvases;
        let frames = BTreeMap::from([(f, frame)]);
        let mut dets = Vec::new();
        for c in &canvases {
            let rendered = render(c, &grid, &frames)?;
            dets.extend(unpack(&oracle_detect_canvas(&rendered, scenario), c, &grid));
        }
        by_frame.extend(group_by_frame(dets));
    }
    let all: Vec<u32> = (1..=scenario.n_frames).collect();
    let tracks = track_frames(kind, cfg, &all, &by_frame)?;
    Ok((by_frame, tracks))
}

/// Outcome of pruning polyominoes built directly from reference boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePolyominoRun {
    pub tracks: Vec<Track>,
    pub tiles_total: usize,
    pub tiles_selected: usize,
}

impl OraclePolyominoRun {
    /// Fraction of tiles skipped; 0 when there are none.
    pub fn pruning_ratio(&self) -> f64 {
        if self.tiles_total == 0 {
            0.0
        } else {
            1.0 - self.tiles_selected as f64 / self.tiles_total as f64
        }
    }
}

/// Prunes polyominoes formed from reference boxes under `gaps`, keeps the
/// detections centred in selected polyominoes and tracks them.
pub fn oracle_polyomino_run(
    detections: &BTreeMap<u32, Vec<Detection>>,
    n_frames: u32,
    grid: &TileGrid,
    gaps: &[Vec<u32>],
    window: u32,
    kind: TrackerKind,
    cfg: TrackerConfig,
) -> Result<OraclePolyominoRun> {
    let mut polys: BTreeMap<u32, Vec<Polyomino>> = BTreeMap::new();
    let mut tiles_total = 0;
    for (&f, dets) in detections {
        let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let ps = extract_polyominoes(&threshold_scores(&boxes_to_scores(f, &boxes, grid), 0.5));
        tiles_total += ps.iter().map(Polyomino::size).sum::<usize>();
        polys.insert(f, ps);
    }
    let sel = prune_windowed(&polys, 1, n_frames.max(1), gaps, window)?;
    let mut tiles_selected = 0;
    let mut kept_tiles: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for &(f, k) in &sel.selected {
        let p = &polys[&f][k];
        tiles_selected += p.size();
        kept_tiles.entry(f).or_default().extend_from_slice(p.tiles());
    }
    let mut kept: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (&f, dets) in detections {
        let Some(tiles) = kept_tiles.get(&f) else { continue };
        let v: Vec<Detection> = dets
            .iter()
            .filter(|d| {
                let (cx, cy) = d.bbox.center();
                grid.tile_at(cx, cy).is_some_and(|t| tiles.contains(&t))
            })
            .cloned()
            .collect();
        kept.insert(f, v);
    }
    let all: Vec<u32> = (1..=n_frames).collect();
    let tracks = track_frames(kind, cfg, &all, &kept)?;
    Ok(OraclePolyominoRun { tracks, tiles_total, tiles_selected })
}

/// Ground-truth boxes of every frame.
pub fn ground_truth_by_frame(scenario: &Scenario) -> BTreeMap<u32, Vec<Detection>> {
    (1..=scenario.n_frames).map(|f| (f, ground_truth_boxes(scenario, f))).collect()
}
