//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use polytrack_core::engine::*;
use polytrack_core::eval::*;
use polytrack_core::gaps::*;
use polytrack_core::grid::{extract_polyominoes, pad_polyomino, threshold_scores, PaddingSpec, Polyomino, TileGrid};
use polytrack_core::pack::{pack, render, unpack, PackItem};
use polytrack_core::prune::{solve_bruteforce, solve_exact, PruneInstance};
use polytrack_core::sim::*;
use polytrack_core::tracker::{interpolate_tracks, tracks_to_csv_string, Track, TrackerConfig, TrackerKind};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed <= limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn c1_golden() -> Outcome {
    let t0 = Instant::now();
    let inst = PruneInstance::from_json(include_str!("fixtures/golden_1d.json")).map_err(|e| e.to_string())?;
    let exact = solve_exact(&inst);
    let brute = solve_bruteforce(&inst).map_err(|e| e.to_string())?;
    within(t0.elapsed(), Duration::from_secs(1))?;
    check(inst.total_tiles() == 27, format!("total tiles {}", inst.total_tiles()))?;
    check(exact.objective == 21, format!("exact objective {}", exact.objective))?;
    check(brute.objective == 21, format!("exhaustive objective {}", brute.objective))?;
    Ok(format!(
        "kept {} of {} tiles; exhaustive over 2^{} selections agrees",
        exact.objective,
        inst.total_tiles(),
        inst.n_polyominoes()
    ))
}

fn c2_pruner_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = common::rng(2);
    let n = 250;
    for k in 0..n {
        let inst = common::random_instance(&mut rng, 12, 6, 4, 4);
        let (e, b) = (solve_exact(&inst), solve_bruteforce(&inst).map_err(|e| e.to_string())?);
        check(e.objective == b.objective, format!("instance {k}: exact {} vs exhaustive {}", e.objective, b.objective))?;
    }
    within(t0.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{n} random instances agree in {:.2?}", t0.elapsed()))
}

fn c3_packer() -> Outcome {
    let grid = TileGrid::new(128, 96, 16).unwrap();
    let n = 600;
    for seed in 0..n {
        let mut rng = common::rng(3_000 + seed);
        let spec = PaddingSpec::ALL[rng.gen_range(0..4)];
        let density = rng.gen_range(0.1..0.7);
        let mut items = Vec::new();
        for f in 1..=rng.gen_range(1..=5) {
            for (k, p) in common::random_polys(&mut rng, f, 6, 8, density).iter().enumerate() {
                items.push(PackItem { poly_index: k, poly: pad_polyomino(p, spec, &grid) });
            }
        }
        let got = pack(&items, 6, 8);
        let layout: Vec<Vec<_>> = got
            .iter()
            .map(|c| {
                let mut v: Vec<_> = c.placements.iter().map(|p| (p.order, (p.frame, p.poly_index, p.offset))).collect();
                v.sort();
                v.into_iter().map(|x| x.1).collect()
            })
            .collect();
        let want = common::ffd_interpreter(&items.iter().map(|i| (i.poly_index, i.poly.clone())).collect::<Vec<_>>(), 6, 8);
        check(layout == want, format!("multiset {seed}: layout differs from interpreter"))?;
        let mut placed = 0;
        for c in &got {
            let mut seen = BTreeSet::new();
            for p in &c.placements {
                for t in p.canvas_tiles() {
                    check(seen.insert(t), format!("multiset {seed}: overlap"))?;
                }
                placed += 1;
            }
        }
        check(placed == items.len(), format!("multiset {seed}: {placed} of {} placed", items.len()))?;
    }
    for n_units in [1usize, 47, 48, 49, 150] {
        let items: Vec<PackItem> = (0..n_units)
            .map(|k| {
                let cell = k % 48;
                let p = Polyomino::new((k / 48) as u32 + 1, vec![(cell / 8, cell % 8)]).unwrap();
                PackItem { poly_index: cell, poly: pad_polyomino(&p, PaddingSpec::None, &grid) }
            })
            .collect();
        let c = pack(&items, 6, 8).len();
        check(c == n_units.div_ceil(48), format!("{n_units} unit tiles used {c} canvases"))?;
    }
    Ok(format!("{n} multisets identical to interpreter; unit-tile canvas counts exact"))
}

fn c4_degenerate() -> Outcome {
    let mut lines = Vec::new();
    for (k, preset) in [Preset::Highway, Preset::Intersection, Preset::Sparse].into_iter().enumerate() {
        let sc = preset.generate(100 + k as u64, 300).unwrap();
        let r = run(&sc, &Config::default(), None).map_err(|e| e.to_string())?;
        let reference = reference_run(&sc, TrackerKind::Sort, TrackerConfig::default()).map_err(|e| e.to_string())?;
        let (a, b) = (tracks_to_csv_string(&r.tracks), tracks_to_csv_string(&reference));
        check(a == b, format!("{preset}: track CSV differs"))?;
        lines.push(format!("{preset} {} bytes", a.len()));
    }
    Ok(format!("byte-identical CSV ({})", lines.join(", ")))
}

fn c5_unpack() -> Outcome {
    let mut rng = common::rng(5);
    let (mut frames_seen, mut checked) = (0, 0);
    let presets = [Preset::Highway, Preset::Intersection, Preset::Sparse];
    while frames_seen < 120 {
        let preset = presets[rng.gen_range(0..3)];
        let sc = preset.generate(rng.gen(), 150).unwrap();
        let grid = sc.grid().unwrap();
        let spec = PaddingSpec::ALL[rng.gen_range(0..4)];
        let batch: BTreeSet<u32> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(1..=sc.n_frames)).collect();
        let (mut items, mut kept, mut frames) = (Vec::new(), BTreeMap::<u32, Vec<Polyomino>>::new(), BTreeMap::new());
        for &f in &batch {
            frames.insert(f, synthesize_frame(&sc, f).unwrap());
            let polys = extract_polyominoes(&threshold_scores(&oracle_relevance(&sc, f, &grid).unwrap(), 0.5));
            for (k, p) in polys.iter().enumerate() {
                if rng.gen_bool(0.75) {
                    items.push(PackItem { poly_index: k, poly: pad_polyomino(p, spec, &grid) });
                    kept.entry(f).or_default().push(p.clone());
                }
            }
            frames_seen += 1;
        }
        let mut unpacked = Vec::new();
        for c in pack(&items, grid.rows, grid.cols) {
            let r = render(&c, &grid, &frames).map_err(|e| e.to_string())?;
            unpacked.extend(unpack(&oracle_detect_canvas(&r, &sc), &c, &grid));
        }
        for (&f, polys) in &kept {
            for gt in ground_truth_boxes(&sc, f) {
                let tiles = tiles_overlapping(&gt.bbox, &grid);
                if polys.iter().any(|p| tiles.iter().all(|t| p.contains(*t))) {
                    checked += 1;
                    check(
                        unpacked.iter().any(|d| d.frame == f && d.bbox == gt.bbox),
                        format!("{preset} frame {f}: box {:?} not recovered exactly", gt.bbox),
                    )?;
                }
            }
        }
    }
    check(checked > 0, "no boxes checked")?;
    Ok(format!("{checked} boxes over {frames_seen} frames recovered exactly"))
}

fn c6_gap_laws() -> Outcome {
    let mut tensors = Vec::new();
    for kind in TrackerKind::ALL {
        for preset in [Preset::Intersection, Preset::Highway] {
            let sc = preset.generate(6, 300).unwrap();
            tensors.push(learn_from_scenario(&sc, &GapSet::default(), kind, TrackerConfig::default()).map_err(|e| e.to_string())?);
        }
    }
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    for t in &tensors {
        for g in 0..t.gammas.len() {
            for i in 0..t.rows {
                for j in 0..t.cols {
                    let r = t.rate(g, (i, j));
                    check(r > 0.0 && r < 1.0, format!("rate {r} outside (0,1)"))?;
                }
            }
        }
        let ms = sweep_tolerances(t, &grid);
        check(ms.windows(2).all(|w| w[0].le(&w[1])), "gap matrix not monotone in tolerance")?;
        check(ms[0].gaps.iter().flatten().all(|g| *g == 1), "M_bar=0 is not all ones")?;
        check(ms[100].gaps.iter().flatten().all(|g| *g == t.gammas.max()), "M_bar=1 is not max gap everywhere")?;
    }
    Ok(format!("{} learned tensors x 101 tolerances", tensors.len()))
}

fn c7_hota() -> Outcome {
    let a = polytrack_core::bbox::BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = polytrack_core::bbox::BBox::new(50.0, 0.0, 60.0, 10.0);
    let reference = vec![
        Track { id: 1, observations: (1..=4).map(|f| (f, a)).collect() },
        Track { id: 2, observations: (1..=4).map(|f| (f, b)).collect() },
    ];
    let same = hota(&reference, &reference).map_err(|e| e.to_string())?.hota;
    check((same - 1.0).abs() < 1e-9, format!("hota(T,T) = {same}"))?;
    let empty = hota(&[], &reference).map_err(|e| e.to_string())?.hota;
    check(empty == 0.0, format!("hota(empty,T) = {empty}"))?;
    let relabeled: Vec<Track> = reference.iter().rev().map(|t| Track { id: t.id + 40, ..t.clone() }).collect();
    let rel = hota(&relabeled, &reference).map_err(|e| e.to_string())?.hota;
    check((rel - 1.0).abs() < 1e-9, format!("relabeled hota {rel}"))?;
    let switched = vec![
        Track { id: 7, observations: vec![(1, a), (2, a), (3, b), (4, b)] },
        Track { id: 8, observations: vec![(1, b), (2, b), (3, a), (4, a)] },
    ];
    let s = hota(&switched, &reference).map_err(|e| e.to_string())?;
    // hand count: DetA 1; each of the 8 matches has 2 co-occurrences over 4+4 frames
    let want_ass = 2.0 / (4.0 + 4.0 - 2.0);
    check((s.ass_a - want_ass).abs() < 1e-9, format!("AssA {} vs {want_ass}", s.ass_a))?;
    check((s.hota - want_ass.sqrt()).abs() < 1e-9, format!("HOTA {} vs {}", s.hota, want_ass.sqrt()))?;
    Ok(format!("identity switch: DetA {:.3}, AssA {:.6}, HOTA {:.6}", s.det_a, s.ass_a, s.hota))
}

fn c8_pareto() -> Outcome {
    let t0 = Instant::now();
    let cfg = TrackerConfig::default();
    let train = Preset::Intersection.generate(80, 300).unwrap();
    let val = Preset::Intersection.generate(81, 300).unwrap();
    let mut tensors = BTreeMap::new();
    let mut refs = BTreeMap::new();
    for kind in TrackerKind::ALL {
        tensors.insert(kind, learn_from_scenario(&train, &GapSet::default(), kind, cfg).map_err(|e| e.to_string())?);
        refs.insert(kind, reference_run(&val, kind, cfg).map_err(|e| e.to_string())?);
    }
    let points = sweep(&val, &SweepGrid::default(), &Config::default(), &tensors, &refs).map_err(|e| e.to_string())?;
    check(points.len() == 480, format!("{} sweep points", points.len()))?;
    let front = pareto(&points);
    for p in &front {
        for q in &front {
            check(
                !dominates((q.throughput_fps, q.hota), (p.throughput_fps, p.hota)),
                "frontier point dominated by another",
            )?;
        }
    }
    let best = front.iter().map(|p| p.hota).fold(f64::NEG_INFINITY, f64::max);
    match select(&front, Constraint::MaxAccuracyLoss(0.0)) {
        Selection::Point(p) => check(p.hota == best, format!("zero-loss selection {} vs best {best}", p.hota))?,
        Selection::Infeasible => check(best >= REFERENCE_ACCURACY, "zero-loss selection infeasible")?,
    }
    within(t0.elapsed(), Duration::from_secs(600))?;
    Ok(format!("480 configs, {} on frontier, best HOTA {best:.4}, {:.1?}", front.len(), t0.elapsed()))
}

fn c9_exhaustive() -> Outcome {
    let t0 = Instant::now();
    let cfg = TrackerConfig::default();
    let gs = GapSet::new(vec![1, 2, 4]).unwrap();
    let train = Preset::Intersection.generate_with(90, 300, 96, 96, 32).unwrap();
    let val = Preset::Intersection.generate_with(91, 200, 96, 96, 32).unwrap();
    let grid = val.grid().unwrap();
    check((grid.rows, grid.cols) == (3, 3), "grid is not 3x3")?;
    let tensor = learn_from_scenario(&train, &gs, TrackerKind::Sort, cfg).map_err(|e| e.to_string())?;
    let (dets, reference) = reference_detections_and_tracks(&val, TrackerKind::Sort, cfg).map_err(|e| e.to_string())?;
    let reference = interpolate_tracks(&reference);
    let score = |gaps: &Vec<Vec<u32>>| -> (f64, f64) {
        let o = oracle_polyomino_run(&dets, val.n_frames, &grid, gaps, 16, TrackerKind::Sort, cfg).unwrap();
        (o.pruning_ratio(), hota(&interpolate_tracks(&o.tracks), &reference).unwrap().hota)
    };
    let all: Vec<(f64, f64)> = (0..3usize.pow(9))
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut g = vec![vec![1u32; 3]; 3];
            for row in g.iter_mut() {
                for v in row.iter_mut() {
                    *v = [1, 2, 4][c % 3];
                    c /= 3;
                }
            }
            score(&g)
        })
        .collect();
    let front: Vec<(f64, f64)> = all.iter().copied().filter(|p| !all.iter().any(|q| dominates(*q, *p))).collect();
    // every distinct learned rate is a breakpoint of the tolerance sweep
    let mut tols: Vec<f64> = vec![0.0, 1.0];
    for g in 0..gs.len() {
        for i in 0..3 {
            for j in 0..3 {
                tols.push(tensor.rate(g, (i, j)));
            }
        }
    }
    tols.sort_by(f64::total_cmp);
    tols.dedup();
    let mut matrices: Vec<Vec<Vec<u32>>> = sweep_tolerances(&tensor, &tols).into_iter().map(|m| m.gaps).collect();
    matrices.dedup();
    let mut worst: f64 = 0.0;
    let mut total_loss = 0.0;
    for m in &matrices {
        let (r, h) = score(m);
        let anchor = front
            .iter()
            .filter(|p| p.0 <= r + 1e-12)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
            .copied()
            .unwrap_or((0.0, 1.0));
        let loss = anchor.1 - h;
        println!("    gaps {m:?}: pruning {r:.4}, HOTA {h:.4}, anchor ({:.4}, {:.4}), loss {loss:.4}", anchor.0, anchor.1);
        worst = worst.max(loss);
        total_loss += loss;
    }
    within(t0.elapsed(), Duration::from_secs(900))?;
    check(worst <= 0.05, format!("max HOTA loss {worst:.4} exceeds 0.05"))?;
    Ok(format!(
        "{} heuristic points vs {} frontier anchors: max loss {worst:.4}, mean loss {:.4}, {:.1?}",
        matrices.len(),
        front.len(),
        total_loss / matrices.len() as f64,
        t0.elapsed()
    ))
}

fn c10_throughput() -> Outcome {
    let cfg = TrackerConfig::default();
    let train = Preset::Sparse.generate(100, 600).unwrap();
    let val = Preset::Sparse.generate(101, 600).unwrap();
    let tensor = learn_from_scenario(&train, &GapSet::default(), TrackerKind::Sort, cfg).map_err(|e| e.to_string())?;
    let gaps = derive_gap_matrix(&tensor, 0.6);
    let base = Config { relevance_threshold: 0.5, ..Config::default() };
    let pruned = run(&val, &Config { tolerance: Some(0.6), ..base.clone() }, Some(&gaps)).map_err(|e| e.to_string())?;
    let plain = run(&val, &base, None).map_err(|e| e.to_string())?;
    check(pruned.detector_calls < pruned.frames, format!("N' {} not below N {}", pruned.detector_calls, pruned.frames))?;
    check(
        pruned.detector_calls <= plain.detector_calls,
        format!("pruning raised N' from {} to {}", plain.detector_calls, pruned.detector_calls),
    )?;
    Ok(format!(
        "N {} ; N' {} without pruning, {} with M_bar=0.6 ({:.1} vs {:.1} modeled fps)",
        pruned.frames, plain.detector_calls, pruned.detector_calls, plain.throughput_fps, pruned.throughput_fps
    ))
}

fn c11_spatial_variance() -> Outcome {
    let sc = Preset::Intersection.generate(110, 900).unwrap();
    let t = learn_from_scenario(&sc, &GapSet::default(), TrackerKind::Sort, TrackerConfig::default()).map_err(|e| e.to_string())?;
    let (approach, exit) = approach_exit_regions(&sc).map_err(|e| e.to_string())?;
    check(!approach.is_empty() && !exit.is_empty(), "empty region")?;
    let mean = |s: &BTreeSet<(usize, usize)>| s.iter().map(|&x| t.rate_at(4, x).unwrap()).sum::<f64>() / s.len() as f64;
    let (a, e) = (mean(&approach), mean(&exit));
    check(a > e, format!("approach mean {a:.4} not above exit mean {e:.4}"))?;
    Ok(format!("gamma=4 mean rate: approach {a:.4} ({} tiles) > exit {e:.4} ({} tiles)", approach.len(), exit.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 golden 1D pruning instance", c1_golden),
        ("2 exact vs exhaustive pruner", c2_pruner_oracle),
        ("3 packer fidelity", c3_packer),
        ("4 degenerate-config equivalence", c4_degenerate),
        ("5 unpack round trip", c5_unpack),
        ("6 gap-matrix laws", c6_gap_laws),
        ("7 HOTA properties", c7_hota),
        ("8 Pareto correctness", c8_pareto),
        ("9 heuristic vs exhaustive gaps", c9_exhaustive),
        ("10 throughput direction", c10_throughput),
        ("11 spatial mistrack variance", c11_spatial_variance),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("PASS  {name}: {msg} [{:.1?}]", t0.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{:.1?}]", t0.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
