//! Learners assembled from the generalized gradients and the SGG loop:
//! mean-graph estimation, structure quantization, orbifold adaline, and a
//! batch k-centroids baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{self, SolverConfig};
use crate::error::{Error, Result};
use crate::gendiff::{self, Distortion};
use crate::graph::{dot, AttributedGraph};
use crate::sgg::{self, HalfSquaredDistance, Objective, Parameter, ProjectionBall, SggConfig, SggTrace};

/// Two samples closer than this count as the same orbit.
pub const DISTINCT_TOL: f64 = 1e-6;

/// `k` centroid graphs of a common shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<AttributedGraph>,
}

impl Codebook {
    pub fn new(centroids: Vec<AttributedGraph>) -> Result<Self> {
        let first = centroids.first().ok_or(Error::EmptyCodebook)?;
        for c in &centroids[1..] {
            first.check_same_shape(c)?;
        }
        Ok(Codebook { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

impl Parameter for Codebook {
    fn zeros_like(&self) -> Self {
        Codebook {
            centroids: self.centroids.iter().map(Parameter::zeros_like).collect(),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (c, o) in self.centroids.iter_mut().zip(&other.centroids) {
            c.axpy(alpha, o);
        }
    }

    fn dot(&self, other: &Self) -> f64 {
        self.centroids
            .iter()
            .zip(&other.centroids)
            .map(|(a, b)| Parameter::dot(a, b))
            .sum()
    }

    /// Each centroid is projected onto its own ball.
    fn project(&self, ball: &ProjectionBall) -> Self {
        Codebook {
            centroids: self.centroids.iter().map(|c| c.project(ball)).collect(),
        }
    }

    fn strip_blocked_normal(&self, grad: &mut Self, ball: &ProjectionBall) {
        for (c, g) in self.centroids.iter().zip(&mut grad.centroids) {
            c.strip_blocked_normal(g, ball);
        }
    }
}

/// Weight graph and bias of the orbifold adaline.
#[derive(Debug, Clone, PartialEq)]
pub struct AdalineModel {
    pub weight: AttributedGraph,
    pub bias: f64,
}

impl AdalineModel {
    pub fn zeros(order: usize, dim: usize) -> Self {
        AdalineModel {
            weight: AttributedGraph::zeros(order, dim),
            bias: 0.0,
        }
    }

    /// `k(x, W) + b`.
    pub fn score(&self, x: &AttributedGraph, cfg: &SolverConfig) -> Result<f64> {
        Ok(alignment::kernel(x, &self.weight, cfg)?.kernel_value + self.bias)
    }
}

/// `(W, b)` is treated as one vector for the projection.
impl Parameter for AdalineModel {
    fn zeros_like(&self) -> Self {
        AdalineModel::zeros(self.weight.order(), self.weight.dim())
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        self.weight.axpy(alpha, &other.weight);
        self.bias += alpha * other.bias;
    }

    fn dot(&self, other: &Self) -> f64 {
        dot(self.weight.as_slice(), other.weight.as_slice()) + self.bias * other.bias
    }

    fn project(&self, ball: &ProjectionBall) -> Self {
        let norm = self.norm();
        if norm > ball.radius {
            let f = ball.radius / norm;
            AdalineModel {
                weight: self.weight.scaled(f),
                bias: self.bias * f,
            }
        } else {
            self.clone()
        }
    }

    fn strip_blocked_normal(&self, grad: &mut Self, ball: &ProjectionBall) {
        let mut w: Vec<f64> = self.weight.as_slice().to_vec();
        w.push(self.bias);
        let mut g: Vec<f64> = grad.weight.as_slice().to_vec();
        g.push(grad.bias);
        sgg::strip_normal_slices(&w, &mut g, ball);
        grad.bias = g.pop().expect("bias coordinate");
        grad.weight.as_mut_slice().copy_from_slice(&g);
    }
}

/// Winner-take-all distortion over a codebook.
#[derive(Debug, Clone, Copy)]
pub struct QuantizeObjective {
    pub distortion: Distortion,
}

impl Objective for QuantizeObjective {
    type Obs = AttributedGraph;
    type Param = Codebook;

    fn subgradient(&self, x: &AttributedGraph, w: &Codebook, cfg: &SolverConfig) -> Result<(Codebook, f64)> {
        let (winner, sg) = gendiff::subgrad_quantize(x, &w.centroids, cfg, self.distortion)?;
        let mut grad = w.zeros_like();
        grad.centroids[winner] = sg.matrix;
        Ok((grad, sg.loss_value))
    }
}

/// Adaline squared residual on labeled graphs.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdalineObjective;

impl Objective for AdalineObjective {
    type Obs = (AttributedGraph, f64);
    type Param = AdalineModel;

    fn subgradient(
        &self,
        (x, y): &(AttributedGraph, f64),
        m: &AdalineModel,
        cfg: &SolverConfig,
    ) -> Result<(AdalineModel, f64)> {
        let (sg, bias_grad) = gendiff::subgrad_adaline(x, *y, &m.weight, m.bias, cfg)?;
        Ok((
            AdalineModel {
                weight: sg.matrix,
                bias: bias_grad,
            },
            sg.loss_value,
        ))
    }
}

fn check_stream(stream: &[AttributedGraph]) -> Result<()> {
    let first = stream.first().ok_or(Error::EmptySample)?;
    for g in &stream[1..] {
        first.check_same_shape(g)?;
    }
    Ok(())
}

/// Mean graph by SGG on `½ d(x, W)²`, initialized at the first sample.
///
/// Step `t` uses `stream[t % len]`, so with `cfg.iterations == stream.len()`
/// and the harmonic schedule the result is the running sample mean in the
/// order-1 case.
pub fn estimate_mean(
    stream: &[AttributedGraph],
    held_out: &[AttributedGraph],
    cfg: &SggConfig,
) -> Result<(AttributedGraph, SggTrace<AttributedGraph>)> {
    check_stream(stream)?;
    sgg::run_sgg(
        |t, _| stream[t % stream.len()].clone(),
        &HalfSquaredDistance,
        stream[0].clone(),
        held_out,
        stream.iter().map(AttributedGraph::length),
        cfg,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidInit {
    /// Start from the first sample, then repeatedly add the sample farthest
    /// from all chosen centroids (lowest index on ties).
    #[default]
    FarthestFirst,
    /// The first `k` pairwise distinct samples in stream order.
    FirstDistinct,
}

/// Picks `k` initial centroids from the stream. When fewer than `k`
/// distinct orbits exist the remaining slots repeat samples in stream order.
pub fn initial_centroids(
    stream: &[AttributedGraph],
    k: usize,
    cfg: &SolverConfig,
    init: CentroidInit,
) -> Result<Vec<AttributedGraph>> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if stream.len() < k {
        return Err(Error::NotEnoughSamples {
            needed: k,
            got: stream.len(),
        });
    }
    let mut chosen: Vec<usize> = vec![0];
    match init {
        CentroidInit::FirstDistinct => {
            for (i, g) in stream.iter().enumerate().skip(1) {
                if chosen.len() == k {
                    break;
                }
                let mut distinct = true;
                for &c in &chosen {
                    if alignment::distance(g, &stream[c], cfg)? <= DISTINCT_TOL {
                        distinct = false;
                        break;
                    }
                }
                if distinct {
                    chosen.push(i);
                }
            }
        }
        CentroidInit::FarthestFirst => {
            let mut min_dist = stream
                .iter()
                .map(|g| alignment::distance(g, &stream[0], cfg))
                .collect::<Result<Vec<_>>>()?;
            while chosen.len() < k {
                let mut best = None;
                for (i, &d) in min_dist.iter().enumerate() {
                    if d > DISTINCT_TOL && best.is_none_or(|b: usize| d > min_dist[b]) {
                        best = Some(i);
                    }
                }
                let Some(next) = best else { break };
                chosen.push(next);
                for (i, g) in stream.iter().enumerate() {
                    let d = alignment::distance(g, &stream[next], cfg)?;
                    min_dist[i] = min_dist[i].min(d);
                }
            }
        }
    }
    let mut fill = 0;
    while chosen.len() < k {
        if !chosen.contains(&fill) {
            chosen.push(fill);
        }
        fill += 1;
    }
    Ok(chosen.into_iter().map(|i| stream[i].clone()).collect())
}

/// Online competitive learning: each step moves only the centroid nearest
/// to the current sample, along the descent direction of its distortion.
pub fn quantize(
    stream: &[AttributedGraph],
    held_out: &[AttributedGraph],
    k: usize,
    cfg: &SggConfig,
    distortion: Distortion,
) -> Result<(Codebook, SggTrace<Codebook>)> {
    quantize_with_init(stream, held_out, k, cfg, distortion, CentroidInit::default())
}

pub fn quantize_with_init(
    stream: &[AttributedGraph],
    held_out: &[AttributedGraph],
    k: usize,
    cfg: &SggConfig,
    distortion: Distortion,
    init: CentroidInit,
) -> Result<(Codebook, SggTrace<Codebook>)> {
    check_stream(stream)?;
    let codebook = Codebook::new(initial_centroids(stream, k, &cfg.solver, init)?)?;
    sgg::run_sgg(
        |t, _| stream[t % stream.len()].clone(),
        &QuantizeObjective { distortion },
        codebook,
        held_out,
        stream.iter().map(AttributedGraph::length),
        cfg,
    )
}

/// Nearest-centroid index for every graph.
pub fn assign(data: &[AttributedGraph], codebook: &Codebook, cfg: &SolverConfig) -> Result<Vec<usize>> {
    use rayon::prelude::*;
    data.par_iter()
        .map(|x| gendiff::nearest_centroid(x, &codebook.centroids, cfg).map(|(w, _)| w))
        .collect()
}

/// Mean distortion (`½ d²` or `d` to the nearest centroid).
pub fn mean_distortion(
    data: &[AttributedGraph],
    codebook: &Codebook,
    cfg: &SolverConfig,
    distortion: Distortion,
) -> Result<f64> {
    sgg::estimate_risk(codebook, data, &QuantizeObjective { distortion }, cfg)
}

/// Fraction of points whose cluster's majority label matches their own.
pub fn purity(assignments: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(assignments.len(), labels.len());
    if assignments.is_empty() {
        return 0.0;
    }
    let clusters = assignments.iter().max().map_or(0, |m| m + 1);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; classes]; clusters];
    for (&a, &l) in assignments.iter().zip(labels) {
        counts[a][l] += 1;
    }
    let majority: usize = counts.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    majority as f64 / assignments.len() as f64
}

/// Adaline by SGG on `(W, b)` jointly, starting from zero. Step `t` draws a
/// training pair uniformly at random.
pub fn adaline_train(
    labeled: &[(AttributedGraph, f64)],
    held_out: &[(AttributedGraph, f64)],
    cfg: &SggConfig,
) -> Result<(AdalineModel, SggTrace<AdalineModel>)> {
    let (first, _) = labeled.first().ok_or(Error::EmptySample)?;
    for (x, y) in labeled.iter().chain(held_out) {
        gendiff::check_label(*y)?;
        first.check_same_shape(x)?;
    }
    let init = AdalineModel::zeros(first.order(), first.dim());
    sgg::run_sgg(
        |_, rng| labeled[rng.random_range(0..labeled.len())].clone(),
        &AdalineObjective,
        init,
        held_out,
        labeled.iter().map(|(x, _)| x.length()),
        cfg,
    )
}

/// `sign(k(x, W) + b)` with ties going to `+1`.
pub fn adaline_predict(model: &AdalineModel, x: &AttributedGraph, cfg: &SolverConfig) -> Result<f64> {
    model.weight.check_same_shape(x)?;
    Ok(if model.score(x, cfg)? >= 0.0 { 1.0 } else { -1.0 })
}

pub fn accuracy(model: &AdalineModel, data: &[(AttributedGraph, f64)], cfg: &SolverConfig) -> Result<f64> {
    use rayon::prelude::*;
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let hits = data
        .par_iter()
        .map(|(x, y)| adaline_predict(model, x, cfg).map(|p| usize::from(p == *y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub codebook: Codebook,
    pub assignments: Vec<usize>,
    /// Mean `½ d²` distortion after each round.
    pub distortions: Vec<f64>,
}

/// Alternates nearest-centroid assignment with recentring each centroid by
/// [`estimate_mean`] over its members (in dataset order, `cfg.iterations`
/// steps). Stops after `rounds` or when assignments stop changing. Empty
/// clusters keep their centroid.
pub fn batch_kcentroids(dataset: &[AttributedGraph], k: usize, rounds: usize, cfg: &SggConfig) -> Result<BatchResult> {
    check_stream(dataset)?;
    let mut codebook = Codebook::new(initial_centroids(dataset, k, &cfg.solver, CentroidInit::default())?)?;
    let mut assignments: Vec<usize> = Vec::new();
    let mut distortions = Vec::new();
    for _ in 0..rounds {
        let next = assign(dataset, &codebook, &cfg.solver)?;
        if next == assignments {
            break;
        }
        assignments = next;
        for (c, centroid) in codebook.centroids.iter_mut().enumerate() {
            let members: Vec<AttributedGraph> = dataset
                .iter()
                .zip(&assignments)
                .filter(|(_, &a)| a == c)
                .map(|(g, _)| g.clone())
                .collect();
            if members.is_empty() {
                continue;
            }
            *centroid = estimate_mean(&members, &[], cfg)?.0;
        }
        distortions.push(mean_distortion(dataset, &codebook, &cfg.solver, Distortion::Sq)?);
    }
    Ok(BatchResult {
        codebook,
        assignments,
        distortions,
    })
}
