//! Detection-to-track association.
//!
//! [`SortTracker`] is the built-in tracker (constant-velocity Kalman filter,
//! IoU cost, Hungarian assignment). Any other association scheme plugs in
//! through the [`Tracker`] trait; [`IouTracker`] is the stand-in used for
//! the "user-provided" slot.

mod assign;
mod kalman;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use assign::{assignment_cost, hungarian};
pub use kalman::KalmanBox;

pub use crate::bbox::iou;
use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::sim::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Frames a track survives without a match.
    pub max_age: u32,
    /// Matches needed before a track's rows are emitted.
    pub min_hits: u32,
    pub iou_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { max_age: 3, min_hits: 1, iou_threshold: 0.3 }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_age < 1 || self.min_hits < 1 || !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidConfig(format!("bad tracker config {self:?}")));
        }
        Ok(())
    }
}

/// One emitted `(frame, track_id, box)` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BBox,
}

/// A sequence of per-frame boxes sharing an identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    /// Strictly increasing in frame.
    pub observations: Vec<(u32, BBox)>,
}

impl Track {
    pub fn first_frame(&self) -> u32 {
        self.observations.first().map_or(0, |o| o.0)
    }

    pub fn last_frame(&self) -> u32 {
        self.observations.last().map_or(0, |o| o.0)
    }
}

/// Frame-by-frame association. Frames must be fed in strictly increasing
/// order; gaps between them are allowed.
pub trait Tracker: Send {
    fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackRow>>;
}

/// Which tracker the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Sort,
    /// Slot for the user's own tracker; backed here by [`IouTracker`].
    User,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 2] = [TrackerKind::User, TrackerKind::Sort];

    pub fn build(self, cfg: TrackerConfig) -> Box<dyn Tracker> {
        match self {
            TrackerKind::Sort => Box::new(SortTracker::new(cfg)),
            TrackerKind::User => Box::new(IouTracker::new(cfg)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Sort => "sort",
            TrackerKind::User => "user",
        }
    }
}

impl std::fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sort" => Ok(TrackerKind::Sort),
            "user" => Ok(TrackerKind::User),
            _ => Err(Error::InvalidConfig(format!("unknown tracker {s:?}"))),
        }
    }
}

struct SortTrack {
    id: u32,
    kf: KalmanBox,
    hits: u32,
    since_update: u32,
}

/// SORT: Kalman predict, IoU-gated Hungarian match, spawn, retire.
///
/// Emitted boxes are the matched detections themselves.
pub struct SortTracker {
    cfg: TrackerConfig,
    tracks: Vec<SortTrack>,
    next_id: u32,
    last_frame: Option<u32>,
}

impl SortTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self { cfg, tracks: Vec::new(), next_id: 1, last_frame: None }
    }

    pub fn live_tracks(&self) -> usize {
        self.tracks.len()
    }
}

fn check_order(last: &mut Option<u32>, frame: u32) -> Result<u32> {
    let elapsed = match *last {
        Some(l) if frame <= l => return Err(Error::NonMonotonicFrame { got: frame, last: l }),
        Some(l) => frame - l,
        None => 1,
    };
    *last = Some(frame);
    Ok(elapsed)
}

impl Tracker for SortTracker {
    fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackRow>> {
        let elapsed = check_order(&mut self.last_frame, frame)?;
        for t in &mut self.tracks {
            t.kf.predict_steps(elapsed);
            t.since_update += elapsed;
        }
        let predicted: Vec<Option<BBox>> = self.tracks.iter().map(|t| t.kf.bbox()).collect();
        let ious: Vec<Vec<f64>> = predicted
            .iter()
            .map(|p| detections.iter().map(|d| p.map_or(0.0, |p| iou(&p, &d.bbox))).collect())
            .collect();
        let mut matched_det = vec![false; detections.len()];
        let mut rows = Vec::new();
        if !self.tracks.is_empty() && !detections.is_empty() {
            let cost: Vec<Vec<f64>> = ious.iter().map(|r| r.iter().map(|v| 1.0 - v).collect()).collect();
            for (ti, di) in hungarian(&cost) {
                if ious[ti][di] < self.cfg.iou_threshold || ious[ti][di] <= 0.0 {
                    continue;
                }
                let t = &mut self.tracks[ti];
                let b = detections[di].bbox;
                t.kf.update(&b);
                t.hits += 1;
                t.since_update = 0;
                matched_det[di] = true;
                if t.hits >= self.cfg.min_hits {
                    rows.push(TrackRow { frame, track_id: t.id, bbox: b });
                }
            }
        }
        for (di, d) in detections.iter().enumerate() {
            if matched_det[di] {
                continue;
            }
            let t = SortTrack { id: self.next_id, kf: KalmanBox::new(&d.bbox), hits: 1, since_update: 0 };
            self.next_id += 1;
            if t.hits >= self.cfg.min_hits {
                rows.push(TrackRow { frame, track_id: t.id, bbox: d.bbox });
            }
            self.tracks.push(t);
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| t.since_update <= max_age);
        rows.sort_by_key(|r| r.track_id);
        Ok(rows)
    }
}

struct IouTrack {
    id: u32,
    last: BBox,
    hits: u32,
    since_update: u32,
}

/// Motion-free greedy IoU tracker: each detection joins the live track whose
/// last box overlaps it most, highest-IoU pairs first.
pub struct IouTracker {
    cfg: TrackerConfig,
    tracks: Vec<IouTrack>,
    next_id: u32,
    last_frame: Option<u32>,
}

impl IouTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self { cfg, tracks: Vec::new(), next_id: 1, last_frame: None }
    }
}

impl Tracker for IouTracker {
    fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackRow>> {
        let elapsed = check_order(&mut self.last_frame, frame)?;
        for t in &mut self.tracks {
            t.since_update += elapsed;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            for (di, d) in detections.iter().enumerate() {
                let v = iou(&t.last, &d.bbox);
                if v >= self.cfg.iou_threshold && v > 0.0 {
                    pairs.push((v, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_t = vec![false; self.tracks.len()];
        let mut used_d = vec![false; detections.len()];
        let mut rows = Vec::new();
        for (_, ti, di) in pairs {
            if used_t[ti] || used_d[di] {
                continue;
            }
            used_t[ti] = true;
            used_d[di] = true;
            let t = &mut self.tracks[ti];
            t.last = detections[di].bbox;
            t.hits += 1;
            t.since_update = 0;
            if t.hits >= self.cfg.min_hits {
                rows.push(TrackRow { frame, track_id: t.id, bbox: t.last });
            }
        }
        for (di, d) in detections.iter().enumerate() {
            if used_d[di] {
                continue;
            }
            let t = IouTrack { id: self.next_id, last: d.bbox, hits: 1, since_update: 0 };
            self.next_id += 1;
            if t.hits >= self.cfg.min_hits {
                rows.push(TrackRow { frame, track_id: t.id, bbox: t.last });
            }
            self.tracks.push(t);
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| t.since_update <= max_age);
        rows.sort_by_key(|r| r.track_id);
        Ok(rows)
    }
}

/// Collects emitted rows into tracks ordered by id.
pub fn rows_to_tracks(rows: impl IntoIterator<Item = TrackRow>) -> Vec<Track> {
    let mut by_id: BTreeMap<u32, Vec<(u32, BBox)>> = BTreeMap::new();
    for r in rows {
        by_id.entry(r.track_id).or_default().push((r.frame, r.bbox));
    }
    by_id
        .into_iter()
        .map(|(id, mut observations)| {
            observations.sort_by_key(|o| o.0);
            Track { id, observations }
        })
        .collect()
}

/// Feeds a frame-ordered detection stream through `tracker`.
pub fn run_tracker<'a>(
    tracker: &mut dyn Tracker,
    stream: impl IntoIterator<Item = (u32, &'a [Detection])>,
) -> Result<Vec<Track>> {
    let mut rows = Vec::new();
    for (frame, dets) in stream {
        rows.extend(tracker.step(frame, dets)?);
    }
    Ok(rows_to_tracks(rows))
}

/// Runs a fresh tracker of `kind` over per-frame detections.
pub fn track_detections(
    kind: TrackerKind,
    cfg: TrackerConfig,
    by_frame: &BTreeMap<u32, Vec<Detection>>,
) -> Result<Vec<Track>> {
    let mut t = kind.build(cfg);
    run_tracker(t.as_mut(), by_frame.iter().map(|(f, d)| (*f, d.as_slice())))
}

fn lerp_box(a: &BBox, b: &BBox, t: f64) -> BBox {
    let l = |p: f64, q: f64| p + (q - p) * t;
    BBox::new(l(a.x1, b.x1), l(a.y1, b.y1), l(a.x2, b.x2), l(a.y2, b.y2))
}

/// Fills every frame between a track's observations with linearly interpolated boxes.
pub fn interpolate_tracks(tracks: &[Track]) -> Vec<Track> {
    tracks
        .iter()
        .map(|t| {
            let mut obs = Vec::with_capacity(t.observations.len());
            for w in t.observations.windows(2) {
                let ((fa, a), (fb, b)) = (w[0], w[1]);
                obs.push((fa, a));
                let g = fb - fa;
                for k in 1..g {
                    obs.push((fa + k, lerp_box(&a, &b, k as f64 / g as f64)));
                }
            }
            if let Some(last) = t.observations.last() {
                obs.push(*last);
            }
            Track { id: t.id, observations: obs }
        })
        .collect()
}

/// Writes `frame,track_id,x,y,w,h` rows sorted by frame, then id.
pub fn write_tracks_csv<W: Write>(tracks: &[Track], out: W) -> Result<()> {
    let mut rows: Vec<(u32, u32, BBox)> =
        tracks.iter().flat_map(|t| t.observations.iter().map(move |(f, b)| (*f, t.id, *b))).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "track_id", "x", "y", "w", "h"])?;
    for (f, id, b) in rows {
        w.write_record([
            f.to_string(),
            id.to_string(),
            b.x1.to_string(),
            b.y1.to_string(),
            b.width().to_string(),
            b.height().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn tracks_to_csv_string(tracks: &[Track]) -> String {
    let mut buf = Vec::new();
    write_tracks_csv(tracks, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[derive(Deserialize)]
struct CsvRow {
    frame: u32,
    track_id: u32,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Parses a tracks CSV (with header). Frames are 1-indexed.
pub fn read_tracks_csv<R: Read>(input: R) -> Result<Vec<Track>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut by_id: BTreeMap<u32, BTreeMap<u32, BBox>> = BTreeMap::new();
    for rec in rdr.deserialize() {
        let r: CsvRow = rec?;
        if r.frame == 0 {
            return Err(Error::Malformed("frames are 1-indexed".into()));
        }
        let b = BBox::from_xywh(r.x, r.y, r.w, r.h);
        if !(b.is_valid() && b.x1.is_finite() && b.y1.is_finite() && b.x2.is_finite() && b.y2.is_finite()) {
            return Err(Error::Malformed(format!("invalid box at frame {} track {}", r.frame, r.track_id)));
        }
        if by_id.entry(r.track_id).or_default().insert(r.frame, b).is_some() {
            return Err(Error::Malformed(format!("track {} has two rows for frame {}", r.track_id, r.frame)));
        }
    }
    Ok(by_id.into_iter().map(|(id, obs)| Track { id, observations: obs.into_iter().collect() }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u32, x: f64, y: f64) -> Detection {
        Detection::new(frame, BBox::from_xywh(x, y, 24.0, 16.0))
    }

    #[test]
    fn constant_velocity_single_track() {
        let mut t = SortTracker::new(TrackerConfig::default());
        let mut rows = Vec::new();
        for f in 1..=30u32 {
            rows.extend(t.step(f, &[det(f, 3.0 * f as f64, 10.0)]).unwrap());
        }
        let tracks = rows_to_tracks(rows);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].observations.len(), 30);
        for (f, b) in &tracks[0].observations {
            assert_eq!(*b, det(*f, 3.0 * *f as f64, 10.0).bbox);
        }
    }

    #[test]
    fn non_monotonic_frames_rejected() {
        let mut t = SortTracker::new(TrackerConfig::default());
        t.step(5, &[]).unwrap();
        assert!(matches!(t.step(5, &[]), Err(Error::NonMonotonicFrame { .. })));
        assert!(t.step(4, &[]).is_err());
        let mut u = IouTracker::new(TrackerConfig::default());
        u.step(2, &[]).unwrap();
        assert!(u.step(1, &[]).is_err());
    }

    #[test]
    fn retired_track_gets_new_id() {
        let cfg = TrackerConfig::default();
        for kind in TrackerKind::ALL {
            let mut t = kind.build(cfg);
            let a = t.step(1, &[det(1, 10.0, 10.0)]).unwrap();
            for f in 2..=(2 + cfg.max_age) {
                assert!(t.step(f, &[]).unwrap().is_empty());
            }
            let b = t.step(3 + cfg.max_age, &[det(0, 10.0, 10.0)]).unwrap();
            assert_ne!(a[0].track_id, b[0].track_id, "{kind}");
        }
    }

    #[test]
    fn track_survives_max_age_gap() {
        let cfg = TrackerConfig::default();
        let mut t = SortTracker::new(cfg);
        let a = t.step(1, &[det(1, 10.0, 10.0)]).unwrap();
        let b = t.step(1 + cfg.max_age, &[det(0, 10.0, 10.0)]).unwrap();
        assert_eq!(a[0].track_id, b[0].track_id);
    }

    #[test]
    fn min_hits_suppresses_early_rows() {
        let cfg = TrackerConfig { min_hits: 2, ..Default::default() };
        let mut t = SortTracker::new(cfg);
        assert!(t.step(1, &[det(1, 0.0, 0.0)]).unwrap().is_empty());
        assert_eq!(t.step(2, &[det(2, 1.0, 0.0)]).unwrap().len(), 1);
    }

    #[test]
    fn interpolation_cases() {
        let t = Track { id: 1, observations: vec![(1, BBox::new(0.0, 0.0, 10.0, 10.0)), (3, BBox::new(20.0, 0.0, 30.0, 10.0))] };
        let out = interpolate_tracks(&[t.clone()]);
        assert_eq!(out[0].observations.len(), 3);
        assert_eq!(out[0].observations[1], (2, BBox::new(10.0, 0.0, 20.0, 10.0)));
        assert_eq!(interpolate_tracks(&out), out);

        let dense = Track { id: 2, observations: (1..=4).map(|f| (f, BBox::new(0.0, 0.0, 1.0, 1.0))).collect() };
        assert_eq!(interpolate_tracks(&[dense.clone()])[0], dense);

        let gap = Track { id: 3, observations: vec![(2, BBox::new(0.0, 0.0, 1.0, 1.0)), (9, BBox::new(7.0, 0.0, 8.0, 1.0))] };
        assert_eq!(interpolate_tracks(&[gap])[0].observations.len(), 2 + 6);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let tracks = vec![
            Track { id: 1, observations: vec![(1, BBox::new(0.0, 0.0, 2.5, 2.0)), (2, BBox::new(1.0, 0.0, 3.5, 2.0))] },
            Track { id: 4, observations: vec![(2, BBox::new(5.0, 5.0, 9.0, 9.0))] },
        ];
        let s = tracks_to_csv_string(&tracks);
        assert!(s.starts_with("frame,track_id,x,y,w,h\n1,1,0,0,2.5,2\n"));
        assert_eq!(read_tracks_csv(s.as_bytes()).unwrap(), tracks);
        assert!(read_tracks_csv("frame,track_id,x,y,w,h\n0,1,0,0,1,1\n".as_bytes()).is_err());
        assert!(read_tracks_csv("frame,track_id,x,y,w,h\n1,1,0,0,-1,1\n".as_bytes()).is_err());
        assert!(read_tracks_csv("frame,track_id,x,y,w,h\n1,1,0,0,1,1\n1,1,0,0,1,1\n".as_bytes()).is_err());
    }
}
