//! Per-tile mistrack rates and the maximum sampling gaps derived from them.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Tile, TileGrid};
use crate::sim::{ground_truth_boxes, Detection, Scenario};
use crate::tracker::{track_detections, Track, TrackerConfig, TrackerKind};

/// Candidate sampling gaps: strictly increasing, starting at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct GapSet(Vec<u32>);

impl GapSet {
    pub fn new(gammas: Vec<u32>) -> Result<Self> {
        if gammas.first() != Some(&1) {
            return Err(Error::InvalidGapSet("gap set must start with 1".into()));
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGapSet(format!("gaps must be strictly increasing: {gammas:?}")));
        }
        Ok(Self(gammas))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn max(&self) -> u32 {
        *self.0.last().expect("gap set is nonempty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for GapSet {
    fn default() -> Self {
        Self(vec![1, 2, 4, 8, 16])
    }
}

impl TryFrom<Vec<u32>> for GapSet {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GapSet> for Vec<u32> {
    fn from(g: GapSet) -> Self {
        g.0
    }
}

impl std::str::FromStr for GapSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = s
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|_| Error::InvalidGapSet(format!("bad gap {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(v)
    }
}

/// Laplace-smoothed miss rate.
pub fn miss_rate(missed: u64, total: u64) -> f64 {
    (missed as f64 + 1.0) / (total as f64 + 2.0)
}

/// Raw link counts, `missed[γ index][tile]` and `total[tile]`, tiles row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissCounts {
    pub missed: Vec<Vec<u64>>,
    pub total: Vec<u64>,
}

impl MissCounts {
    pub fn zeros(n_gammas: usize, n_tiles: usize) -> Self {
        Self { missed: vec![vec![0; n_tiles]; n_gammas], total: vec![0; n_tiles] }
    }

    /// Sums counts from another video measured on the same grid and gaps.
    pub fn add(&mut self, other: &MissCounts) -> Result<()> {
        if self.missed.len() != other.missed.len() || self.total.len() != other.total.len() {
            return Err(Error::GridMismatch("cannot merge counts of different shape".into()));
        }
        for (a, b) in self.missed.iter_mut().zip(&other.missed) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.total.iter_mut().zip(&other.total).for_each(|(x, y)| *x += y);
        Ok(())
    }
}

/// Mistrack rates per candidate gap and tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct MissRateTensor {
    pub tracker: TrackerKind,
    pub gammas: GapSet,
    pub rows: usize,
    pub cols: usize,
    pub counts: MissCounts,
    /// Free-form provenance, e.g. the scenarios and seeds measured.
    pub sources: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    tracker: TrackerKind,
    gammas: GapSet,
    rows: usize,
    cols: usize,
    #[serde(default)]
    sources: Vec<String>,
    /// `missed[γ][i][j]`
    missed: Vec<Vec<Vec<u64>>>,
    /// `total[i][j]`
    total: Vec<Vec<u64>>,
    /// Derived; ignored on load.
    #[serde(default)]
    rates: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<TensorRepr> for MissRateTensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        let shape_ok = |m: &Vec<Vec<u64>>| m.len() == r.rows && m.iter().all(|row| row.len() == r.cols);
        if r.missed.len() != r.gammas.len() || !r.missed.iter().all(shape_ok) || !shape_ok(&r.total) {
            return Err(Error::GridMismatch("tensor counts do not match gammas x rows x cols".into()));
        }
        let total: Vec<u64> = r.total.into_iter().flatten().collect();
        let missed: Vec<Vec<u64>> = r.missed.into_iter().map(|m| m.into_iter().flatten().collect()).collect();
        for m in &missed {
            if m.iter().zip(&total).any(|(a, b)| a > b) {
                return Err(Error::Malformed("missed links exceed total links".into()));
            }
        }
        Ok(Self {
            tracker: r.tracker,
            gammas: r.gammas,
            rows: r.rows,
            cols: r.cols,
            counts: MissCounts { missed, total },
            sources: r.sources,
        })
    }
}

impl From<MissRateTensor> for TensorRepr {
    fn from(t: MissRateTensor) -> Self {
        let grid = |v: &[u64]| v.chunks(t.cols.max(1)).map(<[u64]>::to_vec).collect::<Vec<_>>();
        let rates = (0..t.gammas.len())
            .map(|g| (0..t.rows).map(|i| (0..t.cols).map(|j| t.rate(g, (i, j))).collect()).collect())
            .collect();
        TensorRepr {
            tracker: t.tracker,
            gammas: t.gammas.clone(),
            rows: t.rows,
            cols: t.cols,
            sources: t.sources.clone(),
            missed: t.counts.missed.iter().map(|m| grid(m)).collect(),
            total: grid(&t.counts.total),
            rates,
        }
    }
}

impl MissRateTensor {
    /// Rate at gap index `g` (into `gammas`) and tile.
    pub fn rate(&self, g: usize, (i, j): Tile) -> f64 {
        let k = i * self.cols + j;
        miss_rate(self.counts.missed[g][k], self.counts.total[k])
    }

    /// Rate at gap value `gamma`, if it is in the set.
    pub fn rate_at(&self, gamma: u32, tile: Tile) -> Option<f64> {
        let g = self.gammas.as_slice().iter().position(|&x| x == gamma)?;
        Some(self.rate(g, tile))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Combines measurements of several videos.
    pub fn merge(&mut self, other: &MissRateTensor) -> Result<()> {
        if self.gammas != other.gammas || self.rows != other.rows || self.cols != other.cols {
            return Err(Error::GridMismatch("cannot merge tensors of different shape".into()));
        }
        if self.tracker != other.tracker {
            return Err(Error::InvalidConfig("cannot merge tensors of different trackers".into()));
        }
        self.counts.add(&other.counts)?;
        self.sources.extend(other.sources.iter().cloned());
        Ok(())
    }
}

/// Maximum sampling gap per tile at one tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMatrix {
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerKind>,
    /// `gaps[i][j]`
    pub gaps: Vec<Vec<u32>>,
}

impl GapMatrix {
    /// Every tile must be sampled every frame.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::uniform(rows, cols, 1)
    }

    pub fn uniform(rows: usize, cols: usize, gap: u32) -> Self {
        Self { tolerance: 0.0, tracker: None, gaps: vec![vec![gap; cols]; rows] }
    }

    pub fn rows(&self) -> usize {
        self.gaps.len()
    }

    pub fn cols(&self) -> usize {
        self.gaps.first().map_or(0, Vec::len)
    }

    pub fn get(&self, (i, j): Tile) -> u32 {
        self.gaps[i][j]
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.cols();
        if self.gaps.iter().any(|r| r.len() != c) {
            return Err(Error::Malformed("ragged gap matrix".into()));
        }
        if self.gaps.iter().flatten().any(|g| *g == 0) {
            return Err(Error::Malformed("gap entries must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tolerance) {
            return Err(Error::Malformed(format!("tolerance {} outside [0,1]", self.tolerance)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GapMatrix = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    /// Entrywise `self <= other`.
    pub fn le(&self, other: &GapMatrix) -> bool {
        self.gaps.iter().flatten().zip(other.gaps.iter().flatten()).all(|(a, b)| a <= b)
    }
}

/// Largest gap whose rate stays within `tolerance`, else 1, for every tile.
pub fn derive_gap_matrix(tensor: &MissRateTensor, tolerance: f64) -> GapMatrix {
    let gammas = tensor.gammas.as_slice();
    let gaps = (0..tensor.rows)
        .map(|i| {
            (0..tensor.cols)
                .map(|j| {
                    (0..gammas.len())
                        .filter(|&g| tensor.rate(g, (i, j)) <= tolerance)
                        .map(|g| gammas[g])
                        .max()
                        .unwrap_or(1)
                })
                .collect()
        })
        .collect();
    GapMatrix { tolerance, tracker: Some(tensor.tracker), gaps }
}

pub fn sweep_tolerances(tensor: &MissRateTensor, tolerances: &[f64]) -> Vec<GapMatrix> {
    tolerances.iter().map(|&t| derive_gap_matrix(tensor, t)).collect()
}

/// Tolerances emitted alongside a learned tensor.
pub const DEFAULT_TOLERANCES: [f64; 3] = [0.4, 0.6, 0.8];

type ObsKey = (u32, [u64; 4]);

fn link_tile(grid: &TileGrid, b: &crate::bbox::BBox) -> Option<usize> {
    let (cx, cy) = b.center();
    grid.tile_at(cx, cy).map(|(i, j)| i * grid.cols + j)
}

/// Counts reference links broken when the tracker only sees every γ-th frame.
///
/// `reference` must come from the same tracker run at native rate over
/// `detections`. Sampled frames are `1, 1+γ, 1+2γ, …` up to `last_frame`.
pub fn measure_mistracks(
    reference: &[Track],
    detections: &BTreeMap<u32, Vec<Detection>>,
    last_frame: u32,
    gammas: &GapSet,
    grid: &TileGrid,
    kind: TrackerKind,
    cfg: TrackerConfig,
) -> Result<MissCounts> {
    let n_tiles = grid.n_tiles();
    let mut total = vec![0u64; n_tiles];
    for t in reference {
        for w in t.observations.windows(2) {
            if let Some(k) = link_tile(grid, &w[1].1) {
                total[k] += 1;
            }
        }
    }
    let missed = gammas
        .as_slice()
        .par_iter()
        .map(|&gamma| -> Result<Vec<u64>> {
            let sampled: BTreeMap<u32, Vec<Detection>> = (0..)
                .map(|k| 1 + k * gamma)
                .take_while(|&f| f <= last_frame)
                .map(|f| (f, detections.get(&f).cloned().unwrap_or_default()))
                .collect();
            let run = track_detections(kind, cfg, &sampled)?;
            let owner: HashMap<ObsKey, u32> = run
                .iter()
                .flat_map(|t| t.observations.iter().map(move |(f, b)| ((*f, b.key()), t.id)))
                .collect();
            let mut missed = vec![0u64; n_tiles];
            for t in reference {
                let on_grid: Vec<&(u32, crate::bbox::BBox)> =
                    t.observations.iter().filter(|(f, _)| (f - 1) % gamma == 0).collect();
                for w in on_grid.windows(2) {
                    let ((fa, a), (fb, b)) = (w[0], w[1]);
                    if fb - fa != gamma {
                        continue;
                    }
                    let Some(k) = link_tile(grid, b) else { continue };
                    let kept = match (owner.get(&(*fa, a.key())), owner.get(&(*fb, b.key()))) {
                        (Some(x), Some(y)) => x == y,
                        _ => false,
                    };
                    if !kept {
                        missed[k] += 1;
                    }
                }
            }
            Ok(missed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MissCounts { missed, total })
}

/// Ground-truth detections of every frame, keyed by frame.
pub fn scenario_detections(scenario: &Scenario) -> BTreeMap<u32, Vec<Detection>> {
    (1..=scenario.n_frames).map(|f| (f, ground_truth_boxes(scenario, f))).collect()
}

/// Runs the reference tracker on a scenario and measures its mistrack tensor.
pub fn learn_from_scenario(
    scenario: &Scenario,
    gammas: &GapSet,
    kind: TrackerKind,
    cfg: TrackerConfig,
) -> Result<MissRateTensor> {
    let grid = scenario.grid()?;
    let dets = scenario_detections(scenario);
    let reference = track_detections(kind, cfg, &dets)?;
    let counts = measure_mistracks(&reference, &dets, scenario.n_frames, gammas, &grid, kind, cfg)?;
    Ok(MissRateTensor {
        tracker: kind,
        gammas: gammas.clone(),
        rows: grid.rows,
        cols: grid.cols,
        counts,
        sources: vec![format!("seed={} frames={}", scenario.seed, scenario.n_frames)],
    })
}
