#![allow(dead_code)]

use std::collections::BTreeMap;

use polytrack_core::grid::{extract_polyominoes, PaddedPolyomino, Polyomino, RelevanceMask, Tile};
use polytrack_core::prune::{FramePolyominoes, PruneInstance};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Polyominoes of a random relevance mask.
pub fn random_polys(rng: &mut ChaCha8Rng, frame: u32, rows: usize, cols: usize, density: f64) -> Vec<Polyomino> {
    let cells = (0..rows * cols).map(|_| rng.gen_bool(density)).collect();
    extract_polyominoes(&RelevanceMask::new(frame, rows, cols, cells).unwrap())
}

/// A random instance with at most `max_polys` polyominoes.
pub fn random_instance(rng: &mut ChaCha8Rng, max_polys: usize, max_frames: u32, rows: usize, cols: usize) -> PruneInstance {
    let n_frames = rng.gen_range(1..=max_frames);
    let density = rng.gen_range(0.15..0.6);
    let mut left = max_polys;
    let mut frames = Vec::new();
    for f in 1..=n_frames {
        let mut ps = random_polys(rng, f, rows, cols, density);
        ps.truncate(left);
        left -= ps.len();
        if !ps.is_empty() {
            frames.push(FramePolyominoes { frame: f, polyominoes: ps });
        }
    }
    let gaps = (0..rows).map(|_| (0..cols).map(|_| [1, 2, 4][rng.gen_range(0..3)]).collect()).collect();
    PruneInstance { start_frame: 1, end_frame: n_frames, rows, cols, frames, gaps, last_covered: Vec::new(), video_start: 1, video_end: None }
}

/// Re-bases an instance so it looks like a later window with carried state.
pub fn as_later_window(rng: &mut ChaCha8Rng, inst: &PruneInstance, shift: u32) -> PruneInstance {
    let frames = inst
        .frames
        .iter()
        .map(|fp| FramePolyominoes {
            frame: fp.frame + shift,
            polyominoes: fp.polyominoes.iter().map(|p| Polyomino::new(p.frame() + shift, p.tiles().to_vec()).unwrap()).collect(),
        })
        .collect();
    let last_covered = (0..inst.rows)
        .map(|_| {
            (0..inst.cols)
                .map(|_| if rng.gen_bool(0.5) { Some(rng.gen_range(1..=shift)) } else { None })
                .collect()
        })
        .collect();
    PruneInstance {
        start_frame: inst.start_frame + shift,
        end_frame: inst.end_frame + shift,
        frames,
        last_covered,
        ..inst.clone()
    }
}

/// `(frame, poly_index, offset)` per canvas, from a direct transcription of
/// first-fit-decreasing over tile masks.
pub fn ffd_interpreter(items: &[(usize, PaddedPolyomino)], rows: usize, cols: usize) -> Vec<Vec<(u32, usize, Tile)>> {
    let mut sorted: Vec<&(usize, PaddedPolyomino)> = items.iter().collect();
    sorted.sort_by(|a, b| {
        b.1.occupancy().len().cmp(&a.1.occupancy().len()).then(a.1.frame().cmp(&b.1.frame())).then(a.0.cmp(&b.0))
    });
    let mut masks: Vec<Vec<Vec<bool>>> = Vec::new();
    let mut out: Vec<Vec<(u32, usize, Tile)>> = Vec::new();
    for (idx, p) in sorted {
        let occ = p.occupancy();
        let top = occ.iter().map(|t| t.0).min().unwrap();
        let left = occ.iter().map(|t| t.1).min().unwrap();
        let bottom = occ.iter().map(|t| t.0).max().unwrap();
        let right = occ.iter().map(|t| t.1).max().unwrap();
        let (h, w) = (bottom - top + 1, right - left + 1);
        let fits = |m: &Vec<Vec<bool>>, r: usize, c: usize| {
            occ.iter().all(|&(i, j)| {
                let (y, x) = (i - top + r, j - left + c);
                y < rows && x < cols && !m[y][x]
            })
        };
        let mut placed = None;
        'canvases: for (k, m) in masks.iter().enumerate() {
            if h > rows || w > cols {
                break;
            }
            for r in 0..=rows - h {
                for c in 0..=cols - w {
                    if fits(m, r, c) {
                        placed = Some((k, r, c));
                        break 'canvases;
                    }
                }
            }
        }
        let (k, r, c) = match placed {
            Some(v) => v,
            None => {
                masks.push(vec![vec![false; cols]; rows]);
                out.push(Vec::new());
                (masks.len() - 1, 0, 0)
            }
        };
        for &(i, j) in occ {
            masks[k][i - top + r][j - left + c] = true;
        }
        out[k].push((p.frame(), *idx, (r, c)));
    }
    out
}

/// Independent recheck: every in-window span with any coverage holds a selected polyomino.
pub fn covers_every_span(inst: &PruneInstance, selected: &[(u32, usize)]) -> bool {
    let by_frame: BTreeMap<u32, &Vec<Polyomino>> = inst.frames.iter().map(|f| (f.frame, &f.polyominoes)).collect();
    let covers = |f: u32, t: Tile, only_selected: bool| {
        by_frame.get(&f).is_some_and(|ps| {
            ps.iter().enumerate().any(|(k, p)| p.contains(t) && (!only_selected || selected.contains(&(f, k))))
        })
    };
    for i in 0..inst.rows {
        for j in 0..inst.cols {
            let g = inst.gaps[i][j];
            let mut f = inst.start_frame;
            while f + g - 1 <= inst.end_frame {
                let span = f..f + g;
                let any = span.clone().any(|x| covers(x, (i, j), false));
                let chosen = span.clone().any(|x| covers(x, (i, j), true));
                if any && !chosen {
                    return false;
                }
                f += 1;
            }
        }
    }
    true
}
