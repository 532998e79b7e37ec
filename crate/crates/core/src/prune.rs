//! Coverage-constrained polyomino selection.
//!
//! Every tile location must be sampled at least once in any run of `gap`
//! consecutive frames in which it is relevant at all. Selecting a polyomino
//! samples all of its tiles, so the problem is a weighted set cover over
//! "coverage spans": minimize the selected tile count subject to each
//! nonempty span containing a selected polyomino.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Polyomino;

/// Polyominoes of one frame, in extraction order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePolyominoes {
    pub frame: u32,
    pub polyominoes: Vec<Polyomino>,
}

/// One pruning window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneInstance {
    pub start_frame: u32,
    pub end_frame: u32,
    pub rows: usize,
    pub cols: usize,
    /// Frames with at least one polyomino; any order, frames unique.
    pub frames: Vec<FramePolyominoes>,
    /// Maximum sampling gap per tile, `rows` x `cols`, entries >= 1.
    pub gaps: Vec<Vec<u32>>,
    /// Last frame before `start_frame` at which each tile was covered by a
    /// selected polyomino. Empty means no carried state.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub last_covered: Vec<Vec<Option<u32>>>,
    /// First frame of the video; spans never start before it.
    #[serde(default = "one")]
    pub video_start: u32,
    /// Last frame of the video when later windows follow this one. Spans
    /// running past the window end then need a cover inside the window too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_end: Option<u32>,
}

fn one() -> u32 {
    1
}

/// Identifies polyomino `k` of frame `f`.
pub type PolyRef = (u32, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneSolution {
    /// Selected `(frame, index)` pairs, sorted.
    pub selected: Vec<PolyRef>,
    /// Total selected tiles.
    pub objective: usize,
    /// False when the exact search hit its node budget and fell back to greedy.
    pub optimal: bool,
}

/// At-least-one constraint over variable indices (sorted, nonempty).
pub type Constraint = Vec<usize>;

/// Variables and constraints of an instance.
#[derive(Debug, Clone)]
pub struct Model {
    /// Variable `v` is polyomino `vars[v]`; ordered by frame then index.
    pub vars: Vec<PolyRef>,
    pub costs: Vec<usize>,
    pub constraints: Vec<Constraint>,
}

impl PruneInstance {
    pub fn validate(&self) -> Result<()> {
        if self.start_frame > self.end_frame {
            return Err(Error::Malformed("window start after end".into()));
        }
        if self.gaps.len() != self.rows || self.gaps.iter().any(|r| r.len() != self.cols) {
            return Err(Error::GridMismatch("gap matrix does not match rows x cols".into()));
        }
        if self.gaps.iter().flatten().any(|g| *g == 0) {
            return Err(Error::Malformed("gap entries must be >= 1".into()));
        }
        if !self.last_covered.is_empty()
            && (self.last_covered.len() != self.rows || self.last_covered.iter().any(|r| r.len() != self.cols))
        {
            return Err(Error::GridMismatch("carried state does not match rows x cols".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for fp in &self.frames {
            if fp.frame < self.start_frame || fp.frame > self.end_frame {
                return Err(Error::Malformed(format!("frame {} outside window", fp.frame)));
            }
            if !seen.insert(fp.frame) {
                return Err(Error::Malformed(format!("frame {} listed twice", fp.frame)));
            }
            let mut used = std::collections::BTreeSet::new();
            for p in &fp.polyominoes {
                if p.frame() != fp.frame {
                    return Err(Error::Malformed("polyomino frame does not match its list".into()));
                }
                for &(i, j) in p.tiles() {
                    if i >= self.rows || j >= self.cols {
                        return Err(Error::GridMismatch(format!("tile ({i},{j}) outside grid")));
                    }
                    if !used.insert((i, j)) {
                        return Err(Error::Malformed(format!("polyominoes overlap in frame {}", fp.frame)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: PruneInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_polyominoes(&self) -> usize {
        self.frames.iter().map(|f| f.polyominoes.len()).sum()
    }

    pub fn total_tiles(&self) -> usize {
        self.frames.iter().flat_map(|f| &f.polyominoes).map(Polyomino::size).sum()
    }

    /// Enumerates variables and emits the deduplicated coverage constraints.
    pub fn model(&self) -> Model {
        let mut frames: Vec<&FramePolyominoes> = self.frames.iter().collect();
        frames.sort_by_key(|f| f.frame);
        let mut vars = Vec::new();
        let mut costs = Vec::new();
        let span = (self.end_frame - self.start_frame + 1) as usize;
        // cover[tile][frame offset] -> covering variables
        let mut cover: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); span]; self.rows * self.cols];
        for fp in frames {
            for (k, p) in fp.polyominoes.iter().enumerate() {
                let v = vars.len();
                vars.push((fp.frame, k));
                costs.push(p.size());
                for &(i, j) in p.tiles() {
                    cover[i * self.cols + j][(fp.frame - self.start_frame) as usize].push(v);
                }
            }
        }
        let collect = |tile: usize, from: u32, to: u32| -> Vec<usize> {
            let mut c: Vec<usize> = (from..=to)
                .flat_map(|f| cover[tile][(f - self.start_frame) as usize].iter().copied())
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        let mut constraints = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let tile = i * self.cols + j;
                let g = self.gaps[i][j];
                // spans fully inside the window
                let mut f = self.start_frame;
                while f + g - 1 <= self.end_frame {
                    let c = collect(tile, f, f + g - 1);
                    if !c.is_empty() {
                        constraints.push(c);
                    }
                    f += 1;
                }
                // spans that continue into later windows
                if let Some(ve) = self.video_end.filter(|&ve| ve > self.end_frame) {
                    let from = self.start_frame.max((self.end_frame + 2).saturating_sub(g));
                    for f in from..=self.end_frame {
                        if f + g - 1 > ve {
                            break;
                        }
                        let c = collect(tile, f, self.end_frame);
                        if !c.is_empty() {
                            constraints.push(c);
                        }
                    }
                }
                // spans that began before the window and end inside it
                if self.start_frame > self.video_start {
                    let carried = self.last_covered.get(i).and_then(|r| r[j]);
                    let mut lo = self.video_start.max((self.start_frame + 1).saturating_sub(g));
                    if let Some(f0) = carried {
                        lo = lo.max(f0 + 1);
                    }
                    for f in lo..self.start_frame {
                        let end = f + g - 1;
                        if end < self.start_frame || end > self.end_frame {
                            continue;
                        }
                        let c = collect(tile, self.start_frame, end);
                        if !c.is_empty() {
                            constraints.push(c);
                        }
                    }
                }
            }
        }
        constraints.sort();
        constraints.dedup();
        Model { vars, costs, constraints }
    }
}

/// Emits the at-least-one constraints of an instance.
pub fn build_constraints(inst: &PruneInstance) -> Vec<Constraint> {
    inst.model().constraints
}

/// True when every constraint has a selected variable.
pub fn is_feasible(constraints: &[Constraint], selected: &[bool]) -> bool {
    constraints.iter().all(|c| c.iter().any(|&v| selected[v]))
}

impl Model {
    fn solution(&self, picked: &[bool], optimal: bool) -> PruneSolution {
        let mut selected: Vec<PolyRef> = Vec::new();
        let mut objective = 0;
        for (v, &on) in picked.iter().enumerate() {
            if on {
                selected.push(self.vars[v]);
                objective += self.costs[v];
            }
        }
        selected.sort_unstable();
        PruneSolution { selected, objective, optimal }
    }
}

/// Default node budget per independent component for [`solve_exact`].
pub const DEFAULT_NODE_BUDGET: u64 = 2_000_000;

/// Exact branch-and-bound; among optimal selections returns the one whose
/// sorted variable list is lexicographically smallest.
pub fn solve_exact(inst: &PruneInstance) -> PruneSolution {
    solve_exact_with_budget(inst, DEFAULT_NODE_BUDGET)
}

pub fn solve_exact_with_budget(inst: &PruneInstance, budget: u64) -> PruneSolution {
    let model = inst.model();
    let picked = solve_model(&model, budget);
    model.solution(&picked.0, picked.1)
}

/// Solves a model; returns the selection and whether it is proven optimal.
pub fn solve_model(model: &Model, budget: u64) -> (Vec<bool>, bool) {
    let n = model.vars.len();
    let mut picked = vec![false; n];
    let mut optimal = true;
    for comp in components(n, &model.constraints) {
        let sub = SubProblem::new(model, &comp);
        let (sel, opt) = sub.solve(budget);
        optimal &= opt;
        for (local, on) in sel.into_iter().enumerate() {
            if on {
                picked[comp.vars[local]] = true;
            }
        }
    }
    (picked, optimal)
}

struct Component {
    vars: Vec<usize>,
    constraints: Vec<usize>,
}

fn components(n: usize, constraints: &[Constraint]) -> Vec<Component> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in constraints {
        for w in c.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Component> = BTreeMap::new();
    for (ci, c) in constraints.iter().enumerate() {
        let r = find(&mut parent, c[0]);
        by_root.entry(r).or_insert_with(|| Component { vars: Vec::new(), constraints: Vec::new() }).constraints.push(ci);
    }
    for v in 0..n {
        let r = find(&mut parent, v);
        if let Some(comp) = by_root.get_mut(&r) {
            comp.vars.push(v);
        }
    }
    by_root.into_values().collect()
}

/// A connected component with locally renumbered variables.
struct SubProblem {
    costs: Vec<usize>,
    cons: Vec<Vec<usize>>,
    var_cons: Vec<Vec<usize>>,
}

struct Search<'a> {
    p: &'a SubProblem,
    selected: Vec<bool>,
    excluded: Vec<bool>,
    hits: Vec<u32>,
    cost: usize,
    best: usize,
    best_sel: Option<Vec<bool>>,
    nodes: u64,
    budget: u64,
}

impl SubProblem {
    fn new(model: &Model, comp: &Component) -> Self {
        let local: BTreeMap<usize, usize> = comp.vars.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let cons: Vec<Vec<usize>> =
            comp.constraints.iter().map(|&ci| model.constraints[ci].iter().map(|v| local[v]).collect()).collect();
        let mut var_cons = vec![Vec::new(); comp.vars.len()];
        for (ci, c) in cons.iter().enumerate() {
            for &v in c {
                var_cons[v].push(ci);
            }
        }
        let costs = comp.vars.iter().map(|&g| model.costs[g]).collect();
        Self { costs, cons, var_cons }
    }

    fn solve(&self, budget: u64) -> (Vec<bool>, bool) {
        let greedy = self.greedy();
        let greedy_cost: usize = greedy.iter().zip(&self.costs).filter(|(s, _)| **s).map(|(_, c)| *c).sum();
        let mut s = Search::new(self, budget);
        s.best = greedy_cost + 1;
        s.best_sel = None;
        s.branch_on_constraints();
        if s.nodes > budget {
            return (greedy, false);
        }
        let Some(opt_sel) = s.best_sel.take() else {
            // greedy was already optimal
            return self.lex_refine(greedy_cost, greedy, budget);
        };
        let opt_cost = s.best;
        self.lex_refine(opt_cost, opt_sel, budget)
    }

    /// Index-order include-first search bounded by the known optimum; the
    /// first solution it meets is the lexicographically smallest optimum.
    fn lex_refine(&self, opt_cost: usize, fallback: Vec<bool>, budget: u64) -> (Vec<bool>, bool) {
        let mut s = Search::new(self, budget);
        s.best = opt_cost;
        if s.lex(0) {
            (s.best_sel.expect("lex search records its solution"), true)
        } else {
            (fallback, true)
        }
    }

    fn greedy(&self) -> Vec<bool> {
        let n = self.costs.len();
        let mut sel = vec![false; n];
        let mut covered = vec![false; self.cons.len()];
        let mut left = self.cons.len();
        while left > 0 {
            let mut best: Option<(f64, usize)> = None;
            for v in 0..n {
                if sel[v] {
                    continue;
                }
                let gain = self.var_cons[v].iter().filter(|&&c| !covered[c]).count();
                if gain == 0 {
                    continue;
                }
                let ratio = gain as f64 / self.costs[v] as f64;
                if best.is_none_or(|(r, _)| ratio > r) {
                    best = Some((ratio, v));
                }
            }
            let Some((_, v)) = best else { break };
            sel[v] = true;
            for &c in &self.var_cons[v] {
                if !covered[c] {
                    covered[c] = true;
                    left -= 1;
                }
            }
        }
        // drop redundant picks, most expensive first
        let mut order: Vec<usize> = (0..n).filter(|&v| sel[v]).collect();
        order.sort_by_key(|&v| std::cmp::Reverse((self.costs[v], v)));
        for v in order {
            sel[v] = false;
            let ok = self.var_cons[v].iter().all(|&c| self.cons[c].iter().any(|&u| sel[u]));
            if !ok {
                sel[v] = true;
            }
        }
        sel
    }
}

impl<'a> Search<'a> {
    fn new(p: &'a SubProblem, budget: u64) -> Self {
        let n = p.costs.len();
        Self {
            p,
            selected: vec![false; n],
            excluded: vec![false; n],
            hits: vec![0; p.cons.len()],
            cost: 0,
            best: usize::MAX,
            best_sel: None,
            nodes: 0,
            budget,
        }
    }

    fn select(&mut self, v: usize) {
        self.selected[v] = true;
        self.cost += self.p.costs[v];
        for &c in &self.p.var_cons[v] {
            self.hits[c] += 1;
        }
    }

    fn unselect(&mut self, v: usize) {
        self.selected[v] = false;
        self.cost -= self.p.costs[v];
        for &c in &self.p.var_cons[v] {
            self.hits[c] -= 1;
        }
    }

    /// Lower bound on the extra cost needed: sum of cheapest free variables
    /// over a greedily chosen set of uncovered constraints with pairwise
    /// disjoint free variables. `None` if some constraint cannot be covered.
    fn lower_bound(&self) -> Option<usize> {
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (ci, c) in self.p.cons.iter().enumerate() {
            if self.hits[ci] > 0 {
                continue;
            }
            let m = c.iter().filter(|&&v| !self.excluded[v]).map(|&v| self.p.costs[v]).min()?;
            open.push((m, ci));
        }
        open.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut taken = vec![false; self.p.costs.len()];
        let mut lb = 0;
        for (m, ci) in open {
            let c = &self.p.cons[ci];
            if c.iter().any(|&v| !self.excluded[v] && taken[v]) {
                continue;
            }
            for &v in c {
                if !self.excluded[v] {
                    taken[v] = true;
                }
            }
            lb += m;
        }
        Some(lb)
    }

    fn branch_on_constraints(&mut self) {
        self.nodes += 1;
        if self.nodes > self.budget {
            return;
        }
        let Some(lb) = self.lower_bound() else { return };
        if self.cost + lb >= self.best {
            return;
        }
        // most constrained open constraint
        let mut pick: Option<(usize, usize)> = None;
        for (ci, c) in self.p.cons.iter().enumerate() {
            if self.hits[ci] > 0 {
                continue;
            }
            let free = c.iter().filter(|&&v| !self.excluded[v]).count();
            if pick.is_none_or(|(f, _)| free < f) {
                pick = Some((free, ci));
            }
        }
        let Some((_, ci)) = pick else {
            self.best = self.cost;
            self.best_sel = Some(self.selected.clone());
            return;
        };
        let mut free: Vec<usize> = self.p.cons[ci].iter().copied().filter(|&v| !self.excluded[v]).collect();
        free.sort_by_key(|&v| (self.p.costs[v], v));
        let mut newly_excluded = Vec::new();
        for v in free {
            self.select(v);
            self.branch_on_constraints();
            self.unselect(v);
            self.excluded[v] = true;
            newly_excluded.push(v);
            if self.nodes > self.budget {
                break;
            }
        }
        for v in newly_excluded {
            self.excluded[v] = false;
        }
    }

    fn lex(&mut self, v: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let Some(lb) = self.lower_bound() else { return false };
        if self.cost + lb > self.best {
            return false;
        }
        if self.hits.iter().all(|h| *h > 0) {
            if self.cost <= self.best {
                self.best_sel = Some(self.selected.clone());
                return true;
            }
            return false;
        }
        if v == self.p.costs.len() {
            return false;
        }
        let helps = self.p.var_cons[v].iter().any(|&c| self.hits[c] == 0);
        if helps {
            self.select(v);
            if self.lex(v + 1) {
                return true;
            }
            self.unselect(v);
        }
        self.excluded[v] = true;
        let found = self.lex(v + 1);
        self.excluded[v] = false;
        found
    }
}

/// Largest instance [`solve_bruteforce`] accepts.
pub const BRUTEFORCE_LIMIT: usize = 20;

/// Exhaustive enumeration; same tie-break as [`solve_exact`].
pub fn solve_bruteforce(inst: &PruneInstance) -> Result<PruneSolution> {
    let model = inst.model();
    let n = model.vars.len();
    if n > BRUTEFORCE_LIMIT {
        return Err(Error::TooManyVariables(n, BRUTEFORCE_LIMIT));
    }
    let masks: Vec<u32> =
        model.constraints.iter().map(|c| c.iter().fold(0u32, |m, &v| m | (1 << v))).collect();
    let mut best: Option<(usize, Vec<usize>, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        if !masks.iter().all(|c| c & mask != 0) {
            continue;
        }
        let cost: usize = (0..n).filter(|v| mask >> v & 1 == 1).map(|v| model.costs[v]).sum();
        let idx: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        let better = match &best {
            None => true,
            Some((bc, bi, _)) => cost < *bc || (cost == *bc && idx < *bi),
        };
        if better {
            best = Some((cost, idx, mask));
        }
    }
    let mask = best.map_or(0, |b| b.2);
    let picked: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
    Ok(model.solution(&picked, true))
}

/// Solves a video window by window, carrying each tile's last selected
/// covering frame across seams so spans straddling a seam stay covered.
#[derive(Debug, Clone)]
pub struct WindowedPruner {
    gaps: Vec<Vec<u32>>,
    last_covered: Vec<Vec<Option<u32>>>,
    video_start: u32,
    video_end: u32,
    optimal: bool,
}

impl WindowedPruner {
    /// Windows passed to [`solve_window`](Self::solve_window) must be at
    /// least as long as the largest gap, except the last.
    pub fn new(gaps: Vec<Vec<u32>>, video_start: u32, video_end: u32) -> Self {
        let cols = gaps.first().map_or(0, Vec::len);
        let last_covered = vec![vec![None; cols]; gaps.len()];
        Self { gaps, last_covered, video_start, video_end, optimal: true }
    }

    pub fn max_gap(&self) -> u32 {
        self.gaps.iter().flatten().copied().max().unwrap_or(1)
    }

    /// False once any window fell back to the greedy cover.
    pub fn all_optimal(&self) -> bool {
        self.optimal
    }

    /// Selects among the polyominoes of frames `start..=end`; windows must be
    /// solved in order. `frames` may hold frames outside the window.
    pub fn solve_window(
        &mut self,
        start: u32,
        end: u32,
        frames: &BTreeMap<u32, Vec<Polyomino>>,
    ) -> Result<Vec<PolyRef>> {
        if end < self.video_end && end + 1 - start < self.max_gap() {
            return Err(Error::InvalidConfig(format!(
                "window of {} frames is shorter than the largest gap {}",
                end + 1 - start,
                self.max_gap()
            )));
        }
        let inst = PruneInstance {
            start_frame: start,
            end_frame: end,
            rows: self.gaps.len(),
            cols: self.gaps.first().map_or(0, Vec::len),
            frames: frames
                .range(start..=end)
                .filter(|(_, ps)| !ps.is_empty())
                .map(|(f, ps)| FramePolyominoes { frame: *f, polyominoes: ps.clone() })
                .collect(),
            gaps: self.gaps.clone(),
            last_covered: self.last_covered.clone(),
            video_start: self.video_start,
            video_end: Some(self.video_end),
        };
        inst.validate()?;
        let sol = solve_exact(&inst);
        self.optimal &= sol.optimal;
        for &(f, k) in &sol.selected {
            for &(i, j) in frames[&f][k].tiles() {
                let slot = &mut self.last_covered[i][j];
                *slot = Some(slot.map_or(f, |o| o.max(f)));
            }
        }
        Ok(sol.selected)
    }
}

/// Solves `first_frame..=last_frame` in consecutive windows of `window` frames.
pub fn prune_windowed(
    frames: &BTreeMap<u32, Vec<Polyomino>>,
    first_frame: u32,
    last_frame: u32,
    gaps: &[Vec<u32>],
    window: u32,
) -> Result<WindowedSelection> {
    let window = window.max(1);
    let mut pruner = WindowedPruner::new(gaps.to_vec(), first_frame, last_frame);
    let mut selected = Vec::new();
    let mut start = first_frame;
    while start <= last_frame {
        let end = start.saturating_add(window - 1).min(last_frame);
        selected.extend(pruner.solve_window(start, end, frames)?);
        start = end + 1;
    }
    Ok(WindowedSelection { selected, optimal: pruner.all_optimal() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowedSelection {
    pub selected: Vec<PolyRef>,
    pub optimal: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(frame: u32, from: usize, to: usize) -> Polyomino {
        Polyomino::new(frame, (from..to).map(|j| (0, j)).collect()).unwrap()
    }

    fn single_window(frames: Vec<(u32, Vec<Polyomino>)>, gaps: Vec<Vec<u32>>, n: u32) -> PruneInstance {
        PruneInstance {
            start_frame: 1,
            end_frame: n,
            rows: gaps.len(),
            cols: gaps[0].len(),
            frames: frames.into_iter().map(|(frame, polyominoes)| FramePolyominoes { frame, polyominoes }).collect(),
            gaps,
            last_covered: Vec::new(),
            video_start: 1,
            video_end: None,
        }
    }

    #[test]
    fn gap_one_forces_every_frame() {
        let frames = (1..=4).map(|f| (f, vec![strip(f, 0, 2)])).collect();
        let inst = single_window(frames, vec![vec![1, 1]], 4);
        let cons = build_constraints(&inst);
        assert_eq!(cons, vec![vec![0], vec![1], vec![2], vec![3]]);
        let sol = solve_exact(&inst);
        assert_eq!(sol.objective, 8);
        assert_eq!(sol.selected.len(), 4);
    }

    #[test]
    fn uncovered_tiles_emit_nothing() {
        let inst = single_window(vec![(1, vec![strip(1, 0, 1)])], vec![vec![2, 2]], 4);
        // only tile (0,0) is ever covered: spans [1,2] hold it, later spans are empty
        assert_eq!(build_constraints(&inst), vec![vec![0]]);
        let empty = single_window(vec![], vec![vec![2, 2]], 4);
        assert!(build_constraints(&empty).is_empty());
        let sol = solve_exact(&empty);
        assert_eq!((sol.objective, sol.selected.len()), (0, 0));
        assert_eq!(solve_bruteforce(&empty).unwrap().objective, 0);
    }

    #[test]
    fn carried_state_adds_boundary_constraint() {
        let mut inst = single_window(vec![(5, vec![strip(5, 0, 1)]), (6, vec![strip(6, 0, 1)])], vec![vec![3]], 6);
        inst.start_frame = 5;
        inst.end_frame = 8;
        inst.last_covered = vec![vec![Some(3)]];
        // spans starting at 4 end at 6: coverage {5, 6}
        let cons = build_constraints(&inst);
        assert!(cons.contains(&vec![0, 1]));
        // with a recent cover the boundary span ends before the window content
        inst.last_covered = vec![vec![Some(4)]];
        let cons = build_constraints(&inst);
        assert!(cons.iter().all(|c| c != &vec![0]));
    }

    #[test]
    fn too_many_variables_rejected() {
        let frames = (1..=21).map(|f| (f, vec![strip(f, 0, 1)])).collect();
        let inst = single_window(frames, vec![vec![2]], 21);
        assert!(matches!(solve_bruteforce(&inst), Err(Error::TooManyVariables(21, 20))));
    }

    #[test]
    fn instance_validation() {
        let mut inst = single_window(vec![(1, vec![strip(1, 0, 2), strip(1, 1, 3)])], vec![vec![1, 1, 1]], 2);
        assert!(inst.validate().is_err());
        inst.frames[0].polyominoes.pop();
        assert!(inst.validate().is_ok());
        inst.gaps[0][0] = 0;
        assert!(inst.validate().is_err());
    }

    #[test]
    fn budget_exhaustion_falls_back_to_greedy() {
        let frames = (1..=6).map(|f| (f, vec![strip(f, 0, 2), strip(f, 3, 5)])).collect();
        let inst = single_window(frames, vec![vec![2, 2, 2, 2, 2]], 6);
        let sol = solve_exact_with_budget(&inst, 1);
        assert!(!sol.optimal);
        let model = inst.model();
        let picked: Vec<bool> = model.vars.iter().map(|v| sol.selected.contains(v)).collect();
        assert!(is_feasible(&model.constraints, &picked));
    }
}
