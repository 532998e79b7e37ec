//! HOTA, scene statistics, configuration sweeps and Pareto frontiers.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbox::iou;
use crate::engine::{run, Config};
use crate::error::{Error, Result};
use crate::gaps::{derive_gap_matrix, MissRateTensor};
use crate::grid::{extract_polyominoes, threshold_scores, window_overhead, PaddingSpec};
use crate::sim::{boxes_to_scores, ground_truth_boxes, tiles_overlapping, Scenario};
use crate::tracker::{hungarian, interpolate_tracks, Track, TrackerKind};

/// Localization thresholds 0.05, 0.10, …, 0.95.
pub fn alphas() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaScore {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub alphas: Vec<f64>,
    pub hota_per_alpha: Vec<f64>,
    pub det_a_per_alpha: Vec<f64>,
    pub ass_a_per_alpha: Vec<f64>,
}

/// HOTA of `predicted` against `reference`, both taken as given (interpolate
/// beforehand if needed).
pub fn hota(predicted: &[Track], reference: &[Track]) -> Result<HotaScore> {
    if reference.iter().all(|t| t.observations.is_empty()) {
        return Err(Error::Empty("reference tracks"));
    }
    let alphas = alphas();
    let na = alphas.len();
    let (ng, np) = (reference.len(), predicted.len());

    // per frame: (track index, box)
    let mut frames: BTreeMap<u32, (Vec<(usize, crate::bbox::BBox)>, Vec<(usize, crate::bbox::BBox)>)> =
        BTreeMap::new();
    for (g, t) in reference.iter().enumerate() {
        for &(f, b) in &t.observations {
            frames.entry(f).or_default().0.push((g, b));
        }
    }
    for (p, t) in predicted.iter().enumerate() {
        for &(f, b) in &t.observations {
            frames.entry(f).or_default().1.push((p, b));
        }
    }

    let mut gt_count = vec![0.0f64; ng];
    let mut pr_count = vec![0.0f64; np];
    let mut potential = vec![vec![0.0f64; np]; ng];
    let sims: Vec<Vec<Vec<f64>>> = frames
        .values()
        .map(|(gs, ps)| gs.iter().map(|(_, a)| ps.iter().map(|(_, b)| iou(a, b)).collect()).collect())
        .collect();
    for ((gs, ps), sim) in frames.values().zip(&sims) {
        for (g, _) in gs {
            gt_count[*g] += 1.0;
        }
        for (p, _) in ps {
            pr_count[*p] += 1.0;
        }
        if gs.is_empty() || ps.is_empty() {
            continue;
        }
        let row: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<f64> = (0..ps.len()).map(|c| sim.iter().map(|r| r[c]).sum()).collect();
        for (a, (g, _)) in gs.iter().enumerate() {
            for (b, (p, _)) in ps.iter().enumerate() {
                let denom = row[a] + col[b] - sim[a][b];
                if denom > f64::EPSILON {
                    potential[*g][*p] += sim[a][b] / denom;
                }
            }
        }
    }
    let global: Vec<Vec<f64>> = (0..ng)
        .map(|g| (0..np).map(|p| potential[g][p] / (gt_count[g] + pr_count[p] - potential[g][p])).collect())
        .collect();

    let mut tp = vec![0.0f64; na];
    let mut fneg = vec![0.0f64; na];
    let mut fpos = vec![0.0f64; na];
    let mut matches: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); na];
    for ((gs, ps), sim) in frames.values().zip(&sims) {
        if gs.is_empty() || ps.is_empty() {
            for k in 0..na {
                fneg[k] += gs.len() as f64;
                fpos[k] += ps.len() as f64;
            }
            continue;
        }
        let cost: Vec<Vec<f64>> = gs
            .iter()
            .enumerate()
            .map(|(a, (g, _))| ps.iter().enumerate().map(|(b, (p, _))| -(global[*g][*p] * sim[a][b])).collect())
            .collect();
        let pairs = hungarian(&cost);
        for (k, &alpha) in alphas.iter().enumerate() {
            let mut hit = 0.0;
            for &(a, b) in &pairs {
                if sim[a][b] >= alpha - f64::EPSILON {
                    hit += 1.0;
                    *matches[k].entry((gs[a].0, ps[b].0)).or_insert(0.0) += 1.0;
                }
            }
            tp[k] += hit;
            fneg[k] += gs.len() as f64 - hit;
            fpos[k] += ps.len() as f64 - hit;
        }
    }

    let mut det_a = Vec::with_capacity(na);
    let mut ass_a = Vec::with_capacity(na);
    let mut h = Vec::with_capacity(na);
    for k in 0..na {
        let d = tp[k] / (tp[k] + fneg[k] + fpos[k]).max(1.0);
        let mut s = 0.0;
        for (&(g, p), &m) in &matches[k] {
            s += m * m / (gt_count[g] + pr_count[p] - m);
        }
        let a = s / tp[k].max(1.0);
        det_a.push(d);
        ass_a.push(a);
        h.push((d * a).sqrt());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(HotaScore {
        hota: mean(&h),
        det_a: mean(&det_a),
        ass_a: mean(&ass_a),
        alphas,
        hota_per_alpha: h,
        det_a_per_alpha: det_a,
        ass_a_per_alpha: ass_a,
    })
}

/// HOTA after interpolating both track sets to every frame.
pub fn hota_interpolated(predicted: &[Track], reference: &[Track]) -> Result<HotaScore> {
    hota(&interpolate_tracks(predicted), &interpolate_tracks(reference))
}

/// Ground-truth boxes grouped into one track per object id.
pub fn ground_truth_tracks(scenario: &Scenario) -> Vec<Track> {
    let rows = (1..=scenario.n_frames).flat_map(|f| {
        ground_truth_boxes(scenario, f).into_iter().filter_map(move |d| {
            d.object_id.map(|id| crate::tracker::TrackRow { frame: f, track_id: id, bbox: d.bbox })
        })
    });
    crate::tracker::rows_to_tracks(rows)
}

/// Per-tile relevance frequency and polyomino shape statistics of a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationStats {
    pub frames: u32,
    pub rows: usize,
    pub cols: usize,
    /// Percent of frames in which any box overlaps the tile, `[i][j]`.
    pub relevance_percent: Vec<Vec<f64>>,
    pub mean_relevance_percent: f64,
    /// Mean bounding-rectangle overhead over all polyominoes; 0 when none.
    pub mean_window_overhead: f64,
    pub polyomino_count: usize,
}

pub fn observation_stats(scenario: &Scenario) -> Result<ObservationStats> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let mut hits = vec![vec![0u32; grid.cols]; grid.rows];
    let (mut overhead, mut count) = (0.0, 0usize);
    for f in 1..=scenario.n_frames {
        let boxes: Vec<_> = ground_truth_boxes(scenario, f).into_iter().map(|d| d.bbox).collect();
        let tiles: BTreeSet<_> = boxes.iter().flat_map(|b| tiles_overlapping(b, &grid)).collect();
        for (i, j) in tiles {
            hits[i][j] += 1;
        }
        for p in extract_polyominoes(&threshold_scores(&boxes_to_scores(f, &boxes, &grid), 0.5)) {
            overhead += window_overhead(&p);
            count += 1;
        }
    }
    let n = scenario.n_frames.max(1) as f64;
    let relevance_percent: Vec<Vec<f64>> =
        hits.iter().map(|r| r.iter().map(|&h| 100.0 * h as f64 / n).collect()).collect();
    let mean = relevance_percent.iter().flatten().sum::<f64>() / grid.n_tiles() as f64;
    Ok(ObservationStats {
        frames: scenario.n_frames,
        rows: grid.rows,
        cols: grid.cols,
        relevance_percent,
        mean_relevance_percent: mean,
        mean_window_overhead: if count == 0 { 0.0 } else { overhead / count as f64 },
        polyomino_count: count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub config: Config,
    pub throughput_fps: f64,
    /// HOTA against the reference tracks.
    pub hota: f64,
    pub detector_calls: u32,
    pub pruning_ratio: f64,
}

/// Candidate values per knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub sample_every: Vec<u32>,
    pub relevance_threshold: Vec<f64>,
    pub tolerance: Vec<Option<f64>>,
    pub padding: Vec<PaddingSpec>,
    pub tracker: Vec<TrackerKind>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            sample_every: vec![1, 2, 4, 8, 16],
            relevance_threshold: vec![0.25, 0.5, 0.75],
            tolerance: vec![None, Some(0.4), Some(0.6), Some(0.8)],
            padding: PaddingSpec::ALL.to_vec(),
            tracker: TrackerKind::ALL.to_vec(),
        }
    }
}

impl SweepGrid {
    /// Cross product of the knob values, duplicates removed, in a fixed order.
    pub fn configs(&self, base: &Config) -> Vec<Config> {
        let mut out: Vec<Config> = Vec::new();
        for &a in &self.tracker {
            for &s in &self.sample_every {
                for &t in &self.relevance_threshold {
                    for &m in &self.tolerance {
                        for &p in &self.padding {
                            let c = Config {
                                sample_every: s,
                                relevance_threshold: t,
                                tolerance: m,
                                padding: p,
                                tracker: a,
                                ..base.clone()
                            };
                            if !out.contains(&c) {
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Runs every configuration and scores it against the reference tracks of
/// its tracker. Gaps are derived from `tensors[tracker]` at each tolerance.
pub fn sweep(
    scenario: &Scenario,
    grid: &SweepGrid,
    base: &Config,
    tensors: &BTreeMap<TrackerKind, MissRateTensor>,
    references: &BTreeMap<TrackerKind, Vec<Track>>,
) -> Result<Vec<OperatingPoint>> {
    let configs = grid.configs(base);
    let interp_refs: BTreeMap<TrackerKind, Vec<Track>> =
        references.iter().map(|(k, t)| (*k, interpolate_tracks(t))).collect();
    configs
        .par_iter()
        .map(|cfg| {
            let gaps = match cfg.tolerance {
                Some(m) => {
                    let t = tensors
                        .get(&cfg.tracker)
                        .ok_or_else(|| Error::InvalidConfig(format!("no gap tensor for tracker {}", cfg.tracker)))?;
                    Some(derive_gap_matrix(t, m))
                }
                None => None,
            };
            let report = run(scenario, cfg, gaps.as_ref())?;
            let reference = interp_refs
                .get(&cfg.tracker)
                .ok_or_else(|| Error::InvalidConfig(format!("no reference tracks for tracker {}", cfg.tracker)))?;
            let score = hota(&interpolate_tracks(&report.tracks), reference)?;
            Ok(OperatingPoint {
                config: cfg.clone(),
                throughput_fps: report.throughput_fps,
                hota: score.hota,
                detector_calls: report.detector_calls,
                pruning_ratio: report.pruning_ratio(),
            })
        })
        .collect()
}

/// True if `q` is at least as good as `p` on both axes and better on one.
pub fn dominates(q: (f64, f64), p: (f64, f64)) -> bool {
    q.0 >= p.0 && q.1 >= p.1 && (q.0 > p.0 || q.1 > p.1)
}

/// Non-dominated points on (throughput, accuracy), sorted by throughput.
pub fn pareto(points: &[OperatingPoint]) -> Vec<OperatingPoint> {
    let key = |p: &OperatingPoint| (p.throughput_fps, p.hota);
    let mut front: Vec<OperatingPoint> =
        points.iter().filter(|p| !points.iter().any(|q| dominates(key(q), key(p)))).cloned().collect();
    front.sort_by(|a, b| a.throughput_fps.total_cmp(&b.throughput_fps).then(b.hota.total_cmp(&a.hota)));
    front
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Most accurate point with at least this throughput.
    MinThroughput(f64),
    /// Fastest point losing at most this fraction of the reference accuracy.
    MaxAccuracyLoss(f64),
}

/// Accuracy of the reference pipeline against itself.
pub const REFERENCE_ACCURACY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Point(OperatingPoint),
    Infeasible,
}

pub fn select(frontier: &[OperatingPoint], constraint: Constraint) -> Selection {
    let best = match constraint {
        Constraint::MinThroughput(c) => frontier
            .iter()
            .filter(|p| p.throughput_fps >= c)
            .max_by(|a, b| a.hota.total_cmp(&b.hota).then(a.throughput_fps.total_cmp(&b.throughput_fps))),
        Constraint::MaxAccuracyLoss(d) => frontier
            .iter()
            .filter(|p| p.hota >= (1.0 - d) * REFERENCE_ACCURACY - 1e-12)
            .max_by(|a, b| a.throughput_fps.total_cmp(&b.throughput_fps).then(a.hota.total_cmp(&b.hota))),
    };
    best.cloned().map_or(Selection::Infeasible, Selection::Point)
}

pub const FRONTIER_HEADER: &str = "throughput_fps,hota,s,T_r,M_bar,padding,tracker";

pub fn write_frontier_csv<W: Write>(frontier: &[OperatingPoint], mut out: W) -> Result<()> {
    writeln!(out, "{FRONTIER_HEADER}")?;
    for p in frontier {
        let c = &p.config;
        let m = c.tolerance.map_or("none".to_string(), |t| t.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.throughput_fps, p.hota, c.sample_every, c.relevance_threshold, m, c.padding, c.tracker
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BBox;

    fn op(t: f64, a: f64) -> OperatingPoint {
        OperatingPoint { config: Config::default(), throughput_fps: t, hota: a, detector_calls: 0, pruning_ratio: 0.0 }
    }

    fn pts(front: &[OperatingPoint]) -> Vec<(f64, f64)> {
        front.iter().map(|p| (p.throughput_fps, p.hota)).collect()
    }

    fn track(id: u32, obs: &[(u32, BBox)]) -> Track {
        Track { id, observations: obs.to_vec() }
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pts(&pareto(&[op(1.0, 0.9), op(2.0, 0.95)])), vec![(2.0, 0.95)]);
        assert_eq!(pts(&pareto(&[op(1.0, 1.0), op(2.0, 0.5)])), vec![(1.0, 1.0), (2.0, 0.5)]);
        assert_eq!(pts(&pareto(&[op(3.0, 0.3)])), vec![(3.0, 0.3)]);
    }

    #[test]
    fn select_examples() {
        let f = [op(1.0, 1.0), op(5.0, 0.96), op(20.0, 0.85)];
        let pick = |c| match select(&f, c) {
            Selection::Point(p) => Some((p.throughput_fps, p.hota)),
            Selection::Infeasible => None,
        };
        assert_eq!(pick(Constraint::MaxAccuracyLoss(0.05)), Some((5.0, 0.96)));
        assert_eq!(pick(Constraint::MinThroughput(10.0)), Some((20.0, 0.85)));
        assert_eq!(pick(Constraint::MaxAccuracyLoss(0.01)), Some((1.0, 1.0)));
        assert_eq!(pick(Constraint::MinThroughput(50.0)), None);
    }

    #[test]
    fn table_grid_size() {
        assert_eq!(SweepGrid::default().configs(&Config::default()).len(), 480);
        let dup = SweepGrid { sample_every: vec![1, 1], ..SweepGrid::default() };
        assert_eq!(dup.configs(&Config::default()).len(), 96);
    }

    #[test]
    fn hota_basic_properties() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(20.0, 0.0, 30.0, 10.0);
        let r = vec![track(1, &[(1, a), (2, a)]), track(2, &[(1, b), (2, b)])];
        assert!((hota(&r, &r).unwrap().hota - 1.0).abs() < 1e-12);
        assert_eq!(hota(&[], &r).unwrap().hota, 0.0);
        let relabeled = vec![track(9, &[(1, b), (2, b)]), track(4, &[(1, a), (2, a)])];
        assert!((hota(&relabeled, &r).unwrap().hota - 1.0).abs() < 1e-12);
        assert!(hota(&r, &[]).is_err());
    }

    #[test]
    fn frontier_csv_header() {
        let mut buf = Vec::new();
        write_frontier_csv(&[op(2.0, 0.5)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("throughput_fps,hota,s,T_r,M_bar,padding,tracker\n"));
        assert!(s.contains("2,0.5,1,0,none,none,sort"));
    }

    #[test]
    fn empty_scenario_stats() {
        let mut sc = crate::sim::Preset::Sparse.generate(1, 10).unwrap();
        sc.objects.clear();
        let s = observation_stats(&sc).unwrap();
        assert_eq!((s.mean_relevance_percent, s.mean_window_overhead, s.polyomino_count), (0.0, 0.0, 0));
    }
}
