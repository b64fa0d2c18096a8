//! Optimal alignment kernel, intrinsic metric and graph edit distance.
//!
//! All three quantities optimize over vertex permutations of the first
//! argument while the second stays fixed. Two solvers are provided:
//!
//! * **exact**: lexicographic depth-first enumeration of all `n!`
//!   permutations, capped at [`SolverConfig::exact_max_order`]. Among equal
//!   maximizers the lexicographically smallest permutation wins, so witnesses
//!   are reproducible.
//! * **heuristic**: a greedy seed followed by best-improvement pairwise-swap
//!   hill climbing, repeated over `restarts` starting points (restart 0 is the
//!   greedy seed, the rest are seeded random permutations). It never reports
//!   more than the true optimum.
//!
//! Witness convention: a kernel witness `w` aligns `x` onto `y`, i.e.
//! `kernel_value = <x.apply_permutation(w), y>`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dot, AttributedGraph, Permutation};

/// Radicands of the kernel-form distance above `-RADICAND_TOL` are clamped
/// to zero; anything lower is reported as a solver inconsistency.
pub const RADICAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub exact_max_order: usize,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::Exact,
            exact_max_order: 10,
            restarts: 8,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn exact() -> Self {
        SolverConfig::default()
    }

    pub fn heuristic(restarts: usize, rng_seed: u64) -> Self {
        SolverConfig {
            mode: SolverMode::Heuristic,
            restarts,
            rng_seed,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("solver.restarts", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn with_seed(&self, rng_seed: u64) -> Self {
        SolverConfig {
            rng_seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub kernel_value: f64,
    pub witness: Permutation,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    pub alignment: AlignmentResult,
}

/// Minimal edit path found by [`ged_aligned`]. `witness` maps vertex `i` of
/// `x` to vertex `witness(i)` of `y`, as taken by [`edit_cost`].
#[derive(Debug, Clone, PartialEq)]
pub struct EditResult {
    pub cost: f64,
    pub witness: Permutation,
    pub exact: bool,
}

/// Per-cell objective maximized over permutations `w`: the cell `(i, j)` of
/// `y` is matched with cell `(w(i), w(j))` of `x`.
trait CellObjective: Sync {
    fn order(&self) -> usize;
    fn score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64;
    /// Score used for greedy seeding.
    fn seed_score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64;
    /// True when every score is `<= 0`, which enables pruning.
    fn nonpositive(&self) -> bool;
}

struct KernelObjective<'a> {
    x: &'a AttributedGraph,
    y: &'a AttributedGraph,
}

impl CellObjective for KernelObjective<'_> {
    fn order(&self) -> usize {
        self.y.order()
    }

    #[inline]
    fn score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64 {
        dot(self.x.cell(xi, xj), self.y.cell(i, j))
    }

    #[inline]
    fn seed_score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64 {
        -sq_dist(self.x.cell(xi, xj), self.y.cell(i, j))
    }

    fn nonpositive(&self) -> bool {
        false
    }
}

struct EditObjective<'a> {
    x: &'a AttributedGraph,
    y: &'a AttributedGraph,
}

impl CellObjective for EditObjective<'_> {
    fn order(&self) -> usize {
        self.y.order()
    }

    #[inline]
    fn score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64 {
        -sq_dist(self.x.cell(xi, xj), self.y.cell(i, j)).sqrt()
    }

    #[inline]
    fn seed_score(&self, xi: usize, xj: usize, i: usize, j: usize) -> f64 {
        self.score(xi, xj, i, j)
    }

    fn nonpositive(&self) -> bool {
        true
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Score gained by placing x-vertex `v` at position `k` given the first `k`
/// positions of `w`.
#[inline]
fn placement_gain<O: CellObjective + ?Sized>(
    obj: &O,
    w: &[usize],
    k: usize,
    v: usize,
    seed: bool,
) -> f64 {
    let f = |a, b, i, j| {
        if seed {
            obj.seed_score(a, b, i, j)
        } else {
            obj.score(a, b, i, j)
        }
    };
    let mut gain = f(v, v, k, k);
    for (j, &wj) in w[..k].iter().enumerate() {
        gain += f(v, wj, k, j) + f(wj, v, j, k);
    }
    gain
}

struct ExactSearch<'o, O: ?Sized> {
    obj: &'o O,
    n: usize,
    w: Vec<usize>,
    used: Vec<bool>,
    best: f64,
    best_w: Vec<usize>,
    /// When set, collects every complete permutation within `tol` of the best.
    near: Option<(f64, Vec<(f64, Vec<usize>)>)>,
}

impl<O: CellObjective + ?Sized> ExactSearch<'_, O> {
    fn descend(&mut self, k: usize, partial: f64) {
        if k == self.n {
            if partial > self.best {
                self.best = partial;
                self.best_w.copy_from_slice(&self.w);
            }
            if let Some((tol, list)) = &mut self.near {
                if partial >= self.best - *tol {
                    list.push((partial, self.w.clone()));
                }
                if list.len() > 4096 {
                    let floor = self.best - *tol;
                    list.retain(|(v, _)| *v >= floor);
                }
            }
            return;
        }
        let prune = self.obj.nonpositive() && self.near.is_none();
        for v in 0..self.n {
            if self.used[v] {
                continue;
            }
            let next = partial + placement_gain(self.obj, &self.w, k, v, false);
            if prune && next <= self.best {
                continue;
            }
            self.w[k] = v;
            self.used[v] = true;
            self.descend(k + 1, next);
            self.used[v] = false;
        }
    }
}

fn exact_search<O: CellObjective + ?Sized>(obj: &O) -> Permutation {
    let n = obj.order();
    let mut search = ExactSearch {
        obj,
        n,
        w: vec![0; n],
        used: vec![false; n],
        best: f64::NEG_INFINITY,
        best_w: (0..n).collect(),
        near: None,
    };
    search.descend(0, 0.0);
    Permutation::new(search.best_w).expect("search yields a permutation")
}

fn greedy_seed<O: CellObjective + ?Sized>(obj: &O) -> Vec<usize> {
    let n = obj.order();
    let mut w = vec![0; n];
    let mut used = vec![false; n];
    for k in 0..n {
        let mut best_v = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for v in (0..n).filter(|&v| !used[v]) {
            let gain = placement_gain(obj, &w, k, v, true);
            if gain > best_gain {
                best_gain = gain;
                best_v = v;
            }
        }
        w[k] = best_v;
        used[best_v] = true;
    }
    w
}

fn total_score<O: CellObjective + ?Sized>(obj: &O, w: &[usize]) -> f64 {
    let n = w.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += obj.score(w[i], w[j], i, j);
        }
    }
    s
}

/// Score of all cells in rows or columns `a` and `b`.
fn swap_support<O: CellObjective + ?Sized>(obj: &O, w: &[usize], a: usize, b: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..w.len() {
        s += obj.score(w[a], w[j], a, j) + obj.score(w[b], w[j], b, j);
        if j != a && j != b {
            s += obj.score(w[j], w[a], j, a) + obj.score(w[j], w[b], j, b);
        }
    }
    s
}

const MAX_CLIMB_STEPS: usize = 100_000;

/// Best-improvement pairwise-swap hill climbing; returns the final score.
fn hill_climb<O: CellObjective + ?Sized>(obj: &O, w: &mut [usize]) -> f64 {
    let n = w.len();
    let mut current = total_score(obj, w);
    for _ in 0..MAX_CLIMB_STEPS {
        let mut best_delta = 0.0;
        let mut best_pair = None;
        for a in 0..n {
            for b in a + 1..n {
                let before = swap_support(obj, w, a, b);
                w.swap(a, b);
                let after = swap_support(obj, w, a, b);
                w.swap(a, b);
                let delta = after - before;
                if delta > best_delta {
                    best_delta = delta;
                    best_pair = Some((a, b));
                }
            }
        }
        match best_pair {
            Some((a, b)) if best_delta > 1e-12 * (1.0 + current.abs()) => {
                w.swap(a, b);
                current = total_score(obj, w);
            }
            _ => break,
        }
    }
    current
}

fn heuristic_search<O: CellObjective + ?Sized>(obj: &O, cfg: &SolverConfig) -> Permutation {
    let n = obj.order();
    let restarts = cfg.restarts.max(1);
    let runs: Vec<(f64, Vec<usize>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut w = if r == 0 {
                greedy_seed(obj)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                rng.set_stream(r as u64);
                Permutation::random(n, &mut rng).into()
            };
            let score = hill_climb(obj, &mut w);
            (score, w)
        })
        .collect();
    // ties go to the lowest restart index, independent of scheduling
    let mut best = 0;
    for (r, run) in runs.iter().enumerate().skip(1) {
        if run.0 > runs[best].0 {
            best = r;
        }
    }
    Permutation::new(runs[best].1.clone()).expect("search yields a permutation")
}

fn check_exact_cap(order: usize, cfg: &SolverConfig) -> Result<()> {
    if order > cfg.exact_max_order {
        return Err(Error::ExactOrderExceeded {
            order,
            cap: cfg.exact_max_order,
        });
    }
    Ok(())
}

fn solve<O: CellObjective + ?Sized>(obj: &O, cfg: &SolverConfig) -> Result<(Permutation, bool)> {
    match cfg.mode {
        SolverMode::Exact => {
            check_exact_cap(obj.order(), cfg)?;
            Ok((exact_search(obj), true))
        }
        SolverMode::Heuristic => {
            cfg.validate()?;
            Ok((heuristic_search(obj, cfg), false))
        }
    }
}

fn alignment_result(x: &AttributedGraph, y: &AttributedGraph, witness: Permutation, exact: bool) -> AlignmentResult {
    let kernel_value = dot(x.permuted(&witness).as_slice(), y.as_slice());
    AlignmentResult {
        kernel_value,
        witness,
        exact,
    }
}

/// Optimal alignment kernel `k(x, y) = max_P <P·x, y>`.
pub fn kernel(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<AlignmentResult> {
    x.check_same_shape(y)?;
    let (witness, exact) = solve(&KernelObjective { x, y }, cfg)?;
    Ok(alignment_result(x, y, witness, exact))
}

/// Greedy + pairwise-swap alignment regardless of `cfg.mode`.
pub fn heuristic_align(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<AlignmentResult> {
    x.check_same_shape(y)?;
    cfg.validate()?;
    let witness = heuristic_search(&KernelObjective { x, y }, cfg);
    Ok(alignment_result(x, y, witness, false))
}

/// Intrinsic metric together with the alignment that attains it.
pub fn distance_aligned(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<DistanceResult> {
    let alignment = kernel(x, y, cfg)?;
    // lengths are orbit invariants; evaluating them on the aligned
    // representative keeps the radicand exactly zero on identical orbits
    let xw = x.permuted(&alignment.witness);
    let radicand = xw.norm_sq() - 2.0 * alignment.kernel_value + y.norm_sq();
    if radicand < -RADICAND_TOL {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(DistanceResult {
        distance: radicand.max(0.0).sqrt(),
        alignment,
    })
}

/// `d(x, y) = sqrt(l(x)² - 2 k(x, y) + l(y)²)`.
pub fn distance(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<f64> {
    distance_aligned(x, y, cfg).map(|r| r.distance)
}

/// Cost of the edit path that maps vertex `i` of `x` to vertex `p(i)` of
/// `y`: the sum over all cell pairs of Euclidean attribute distances.
pub fn edit_cost(x: &AttributedGraph, y: &AttributedGraph, p: &Permutation) -> Result<f64> {
    x.check_same_shape(y)?;
    if p.len() != x.order() {
        return Err(Error::ShapeMismatch {
            left: x.shape_string(),
            right: format!("permutation of size {}", p.len()),
        });
    }
    let n = x.order();
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..n {
            cost += sq_dist(x.cell(i, j), y.cell(p.get(i), p.get(j))).sqrt();
        }
    }
    Ok(cost)
}

/// Minimal-cost edit path over alignments at the common padded order.
pub fn ged_aligned(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<EditResult> {
    x.check_same_shape(y)?;
    let (w, exact) = solve(&EditObjective { x, y }, cfg)?;
    // the objective places x-vertex w(i) at y-vertex i
    let witness = w.inverse();
    let cost = edit_cost(x, y, &witness)?;
    Ok(EditResult { cost, witness, exact })
}

pub fn ged(x: &AttributedGraph, y: &AttributedGraph, cfg: &SolverConfig) -> Result<f64> {
    ged_aligned(x, y, cfg).map(|r| r.cost)
}

/// Kernel maximizers up to `tol`, deduplicated by aligned representative.
///
/// Permutations related by an automorphism of `x` produce the same aligned
/// matrix and count once. More than one entry means `w ↦ k(x, w)` is not
/// differentiable at `y` (up to `tol`). Always enumerates exhaustively.
pub fn optimal_alignments(
    x: &AttributedGraph,
    y: &AttributedGraph,
    cfg: &SolverConfig,
    tol: f64,
) -> Result<Vec<AlignmentResult>> {
    x.check_same_shape(y)?;
    check_exact_cap(x.order(), cfg)?;
    let obj = KernelObjective { x, y };
    let n = x.order();
    let mut search = ExactSearch {
        obj: &obj,
        n,
        w: vec![0; n],
        used: vec![false; n],
        best: f64::NEG_INFINITY,
        best_w: (0..n).collect(),
        near: Some((tol, Vec::new())),
    };
    search.descend(0, 0.0);
    let best = search.best;
    let (_, near) = search.near.take().expect("collection enabled");
    let mut out: Vec<(AlignmentResult, AttributedGraph)> = Vec::new();
    for (value, w) in near {
        if value < best - tol {
            continue;
        }
        let witness = Permutation::new(w).expect("search yields a permutation");
        let aligned = x.permuted(&witness);
        if out.iter().any(|(_, a)| a.as_slice() == aligned.as_slice()) {
            continue;
        }
        out.push((alignment_result(x, y, witness, true), aligned));
    }
    Ok(out.into_iter().map(|(r, _)| r).collect())
}
