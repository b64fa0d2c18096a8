//! Projected stochastic generalized gradient (SGG) iteration
//!
//! `W_{t+1} = Π(W_t - η_t S_t)` where `S_t` is a witness-selected generalized
//! gradient of the loss at a fresh observation and `Π` is the projection
//! onto a Frobenius ball around the origin. The ball is closed under the
//! permutation action, so projecting a representative is consistent with
//! projecting its orbit.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::{dot, AttributedGraph};

/// `η_t = eta0 / (1 + t / tau)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub eta0: f64,
    pub tau: f64,
    pub power: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            eta0: 0.5,
            tau: 50.0,
            power: 1.0,
        }
    }
}

impl StepSchedule {
    /// `η_t = 1 / (t + 1)`, under which SGG on the half squared distance
    /// produces running sample means.
    pub fn harmonic() -> Self {
        StepSchedule {
            eta0: 1.0,
            tau: 1.0,
            power: 1.0,
        }
    }

    #[inline]
    pub fn eta(&self, t: usize) -> f64 {
        let base = 1.0 + t as f64 / self.tau;
        if self.power == 1.0 {
            self.eta0 / base
        } else {
            self.eta0 / base.powf(self.power)
        }
    }

    /// `Σ η_t` diverges iff `power <= 1`; `Σ η_t²` converges iff `power > 1/2`.
    pub fn sum_diverges(&self) -> bool {
        self.power <= 1.0
    }

    pub fn square_sum_converges(&self) -> bool {
        self.power > 0.5
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::config("schedule.eta0", "must be positive and finite"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("schedule.tau", "must be positive and finite"));
        }
        if !(self.power > 0.5 && self.power <= 1.0) {
            return Err(Error::config("schedule.power", "must lie in (0.5, 1]"));
        }
        Ok(())
    }
}

/// Frobenius ball `{w : ||w|| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBall {
    pub radius: f64,
}

impl ProjectionBall {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("radius", "must be positive and finite"));
        }
        Ok(ProjectionBall { radius })
    }

    /// Ten times the largest length in the sample (at least 1).
    pub fn for_sample(lengths: impl IntoIterator<Item = f64>) -> Self {
        let max = lengths.into_iter().fold(0.0_f64, f64::max);
        ProjectionBall {
            radius: if max > 0.0 { 10.0 * max } else { 1.0 },
        }
    }

    /// Rescale factor that brings a vector of norm `norm` into the ball.
    #[inline]
    fn factor(&self, norm: f64) -> Option<f64> {
        (norm > self.radius).then(|| self.radius / norm)
    }
}

/// Rescales `w` onto the ball if it lies outside; otherwise returns it as is.
pub fn project_ball(w: &AttributedGraph, ball: &ProjectionBall) -> AttributedGraph {
    w.project(ball)
}

/// Parameter types the iteration can move. All are finite-dimensional
/// Euclidean vectors in disguise.
pub trait Parameter: Clone + Send + Sync {
    fn zeros_like(&self) -> Self;
    /// `self += alpha * other`
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn dot(&self, other: &Self) -> f64;
    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
    /// Projection onto the feasible set defined by `ball`.
    fn project(&self, ball: &ProjectionBall) -> Self;
    /// Removes from `grad` the components whose descent direction would
    /// leave the feasible set at `self`.
    fn strip_blocked_normal(&self, grad: &mut Self, ball: &ProjectionBall);
}

impl Parameter for AttributedGraph {
    fn zeros_like(&self) -> Self {
        AttributedGraph::zeros(self.order(), self.dim())
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        AttributedGraph::axpy(self, alpha, other)
    }

    fn dot(&self, other: &Self) -> f64 {
        dot(self.as_slice(), other.as_slice())
    }

    fn project(&self, ball: &ProjectionBall) -> Self {
        match ball.factor(self.length()) {
            Some(f) => self.scaled(f),
            None => self.clone(),
        }
    }

    fn strip_blocked_normal(&self, grad: &mut Self, ball: &ProjectionBall) {
        strip_normal_slices(self.as_slice(), grad.as_mut_slice(), ball);
    }
}

/// Boundary treatment shared by the parameter types: at `||w|| = radius`,
/// the outward normal is `w / ||w||` and a gradient with a negative normal
/// component (descent pushing outward) loses that component.
pub(crate) fn strip_normal_slices(w: &[f64], grad: &mut [f64], ball: &ProjectionBall) {
    let norm = dot(w, w).sqrt();
    if norm < ball.radius * (1.0 - 1e-12) || norm == 0.0 {
        return;
    }
    let c = dot(w, grad) / norm;
    if c < 0.0 {
        for (g, x) in grad.iter_mut().zip(w) {
            *g -= c * x / norm;
        }
    }
}

/// A loss `L(z, W)` with a single-valued generalized gradient selection.
pub trait Objective: Sync {
    type Obs: Sync;
    type Param: Parameter;

    /// Selected subgradient and the loss value at the same point.
    fn subgradient(&self, obs: &Self::Obs, param: &Self::Param, cfg: &SolverConfig)
        -> Result<(Self::Param, f64)>;

    fn loss(&self, obs: &Self::Obs, param: &Self::Param, cfg: &SolverConfig) -> Result<f64> {
        self.subgradient(obs, param, cfg).map(|(_, l)| l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SggConfig {
    pub schedule: StepSchedule,
    /// Projection radius; `None` resolves to ten times the largest sample
    /// length.
    pub radius: Option<f64>,
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub rng_seed: u64,
    pub solver: SolverConfig,
}

impl Default for SggConfig {
    fn default() -> Self {
        SggConfig {
            schedule: StepSchedule::default(),
            radius: None,
            iterations: 1000,
            checkpoint_every: 100,
            rng_seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl SggConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let Some(r) = self.radius {
            ProjectionBall::new(r)?;
        }
        if self.iterations == 0 {
            return Err(Error::config("sgg.iterations", "must be at least 1"));
        }
        self.solver.validate()
    }

    /// The configured ball, or the default sized from `lengths`.
    pub fn ball(&self, lengths: impl IntoIterator<Item = f64>) -> Result<ProjectionBall> {
        match self.radius {
            Some(r) => ProjectionBall::new(r),
            None => Ok(ProjectionBall::for_sample(lengths)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<P> {
    /// Number of steps taken.
    pub t: usize,
    /// Step size of the last step (0 at `t = 0`).
    pub eta: f64,
    /// Held-out risk; absent without an evaluation sample.
    pub risk: Option<f64>,
    /// `||η S||` of the last step (0 at `t = 0`).
    pub step_norm: f64,
    pub stationarity: Option<f64>,
    pub iterate: P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SggTrace<P> {
    pub checkpoints: Vec<Checkpoint<P>>,
    /// `||η_t S_t||` for every step.
    pub step_norms: Vec<f64>,
    /// Largest `||S_t||` seen; an empirical guard for bounded second moments.
    pub max_subgradient_norm: f64,
    pub ball: ProjectionBall,
    pub seed: u64,
}

impl<P> SggTrace<P> {
    pub fn risks(&self) -> Vec<f64> {
        self.checkpoints.iter().filter_map(|c| c.risk).collect()
    }

    /// Columns `t,eta,risk,step_norm,stationarity`; absent values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,eta,risk,step_norm,stationarity\n");
        for c in &self.checkpoints {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.t,
                c.eta,
                opt(c.risk),
                c.step_norm,
                opt(c.stationarity)
            );
        }
        out
    }
}

/// Per-step solver seed; distinct steps get decorrelated heuristic restarts.
pub(crate) fn step_seed(base: u64, t: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean loss over the sample.
pub fn estimate_risk<O: Objective>(
    param: &O::Param,
    sample: &[O::Obs],
    objective: &O,
    cfg: &SolverConfig,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let losses = sample
        .par_iter()
        .map(|z| objective.loss(z, param, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / sample.len() as f64)
}

/// Norm of the averaged selected subgradient, with the blocked normal
/// component removed on the boundary of the ball. A computable surrogate
/// for the first-order stationarity condition, not a membership test.
pub fn stationarity_diagnostic<O: Objective>(
    param: &O::Param,
    sample: &[O::Obs],
    objective: &O,
    ball: &ProjectionBall,
    cfg: &SolverConfig,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let grads = sample
        .par_iter()
        .map(|z| objective.subgradient(z, param, cfg).map(|(g, _)| g))
        .collect::<Result<Vec<_>>>()?;
    let mut avg = param.zeros_like();
    let inv = 1.0 / sample.len() as f64;
    for g in &grads {
        avg.axpy(inv, g);
    }
    param.strip_blocked_normal(&mut avg, ball);
    Ok(avg.norm())
}

/// Runs `cfg.iterations` projected SGG steps from `init`.
///
/// `sampler(t, rng)` yields the observation for step `t`; the generator is
/// seeded from `cfg.rng_seed`. Checkpoints are taken at `t = 0`, every
/// `checkpoint_every` steps and after the last step, with risk and
/// stationarity evaluated on `held_out` when it is nonempty. Without a
/// configured radius the ball is sized from `lengths` and the norm of `init`.
pub fn run_sgg<O, S>(
    mut sampler: S,
    objective: &O,
    init: O::Param,
    held_out: &[O::Obs],
    lengths: impl IntoIterator<Item = f64>,
    cfg: &SggConfig,
) -> Result<(O::Param, SggTrace<O::Param>)>
where
    O: Objective,
    S: FnMut(usize, &mut ChaCha8Rng) -> O::Obs,
{
    cfg.validate()?;
    let ball = cfg.ball(lengths.into_iter().chain(std::iter::once(init.norm())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut w = init.project(&ball);
    let mut trace = SggTrace {
        checkpoints: Vec::new(),
        step_norms: Vec::with_capacity(cfg.iterations),
        max_subgradient_norm: 0.0,
        ball,
        seed: cfg.rng_seed,
    };

    let checkpoint = |w: &O::Param, t: usize, eta: f64, step_norm: f64| -> Result<Checkpoint<O::Param>> {
        let eval_cfg = cfg.solver.with_seed(step_seed(cfg.solver.rng_seed, usize::MAX - t));
        let (risk, stationarity) = if held_out.is_empty() {
            (None, None)
        } else {
            (
                Some(estimate_risk(w, held_out, objective, &eval_cfg)?),
                Some(stationarity_diagnostic(w, held_out, objective, &ball, &eval_cfg)?),
            )
        };
        Ok(Checkpoint {
            t,
            eta,
            risk,
            step_norm,
            stationarity,
            iterate: w.clone(),
        })
    };

    trace
        .checkpoints
        .push(checkpoint(&w, 0, 0.0, 0.0).map_err(|e| Error::at_iteration(0, e))?);

    for t in 0..cfg.iterations {
        let z = sampler(t, &mut rng);
        let step_cfg = cfg.solver.with_seed(step_seed(cfg.solver.rng_seed, t));
        let (g, _) = objective
            .subgradient(&z, &w, &step_cfg)
            .map_err(|e| Error::at_iteration(t, e))?;
        let eta = cfg.schedule.eta(t);
        let g_norm = g.norm();
        trace.max_subgradient_norm = trace.max_subgradient_norm.max(g_norm);
        trace.step_norms.push(eta * g_norm);
        w.axpy(-eta, &g);
        w = w.project(&ball);

        let done = t + 1;
        if done == cfg.iterations || (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
            trace
                .checkpoints
                .push(checkpoint(&w, done, eta, eta * g_norm).map_err(|e| Error::at_iteration(t, e))?);
        }
    }
    Ok((w, trace))
}

/// `½ d(x, W)²` with the mean-estimation subgradient `W - P*·x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSquaredDistance;

impl Objective for HalfSquaredDistance {
    type Obs = AttributedGraph;
    type Param = AttributedGraph;

    fn subgradient(&self, x: &AttributedGraph, w: &AttributedGraph, cfg: &SolverConfig) -> Result<(AttributedGraph, f64)> {
        let sg = crate::gendiff::subgrad_sq_half_dist(x, w, cfg)?;
        Ok((sg.matrix, sg.loss_value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Permutation;
    use rand::Rng;

    fn scalar(v: f64) -> AttributedGraph {
        AttributedGraph::from_edge_list(&[vec![v]], &[], true).unwrap()
    }

    fn vector(v: &[f64]) -> AttributedGraph {
        AttributedGraph::from_edge_list(&[v.to_vec()], &[], true).unwrap()
    }

    #[test]
    fn projection_cases() {
        let ball = ProjectionBall::new(2.0).unwrap();
        let inside = vector(&[0.6, 0.8]);
        assert_eq!(project_ball(&inside, &ball), inside);
        let outside = vector(&[2.4, 3.2]);
        let p = project_ball(&outside, &ball);
        assert!((p.length() - 2.0).abs() < 1e-15);
        assert!((p.as_slice()[0] - 1.2).abs() < 1e-15);
        assert_eq!(project_ball(&p, &ball), p);
        assert!(ProjectionBall::new(0.0).is_err());
    }

    #[test]
    fn schedule() {
        let s = StepSchedule::default();
        assert_eq!(s.eta(0), 0.5);
        assert_eq!(s.eta(50), 0.25);
        assert!(s.sum_diverges() && s.square_sum_converges());
        assert!(s.validate().is_ok());
        let h = StepSchedule::harmonic();
        assert_eq!(h.eta(3), 0.25);
        let bad = StepSchedule { power: 0.5, ..s };
        assert!(bad.validate().is_err());
        assert!(!bad.square_sum_converges());
    }

    #[test]
    fn risk_and_stationarity() {
        let cfg = SolverConfig::exact();
        let ball = ProjectionBall::new(100.0).unwrap();
        let x0 = scalar(2.0);
        assert_eq!(estimate_risk(&scalar(5.0), std::slice::from_ref(&x0), &HalfSquaredDistance, &cfg).unwrap(), 4.5);
        assert!(estimate_risk(&x0, &[], &HalfSquaredDistance, &cfg).is_err());

        let data = [scalar(1.0), scalar(4.0)];
        let s = stationarity_diagnostic(&scalar(2.5), &data, &HalfSquaredDistance, &ball, &cfg).unwrap();
        assert!(s < 1e-9);
        let far = scalar(50.0);
        let s = stationarity_diagnostic(&far, &data, &HalfSquaredDistance, &ball, &cfg).unwrap();
        assert!((s - 47.5).abs() < 1e-12);
    }

    #[test]
    fn stationarity_on_boundary_drops_blocked_normal() {
        // minimizer outside the ball: the projected point is stationary
        let cfg = SolverConfig::exact();
        let ball = ProjectionBall::new(1.0).unwrap();
        let data = [scalar(3.0)];
        let s = stationarity_diagnostic(&scalar(1.0), &data, &HalfSquaredDistance, &ball, &cfg).unwrap();
        assert_eq!(s, 0.0);
        let s = stationarity_diagnostic(&scalar(-1.0), &data, &HalfSquaredDistance, &ball, &cfg).unwrap();
        assert_eq!(s, 4.0);
    }

    #[test]
    fn degenerate_distribution_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cells = (0..4 * 4 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x0 = AttributedGraph::from_cells(4, 2, cells).unwrap();
        let init = AttributedGraph::zeros(4, 2);
        let cfg = SggConfig {
            schedule: StepSchedule::harmonic(),
            iterations: 20,
            checkpoint_every: 1,
            ..SggConfig::default()
        };
        let perms: Vec<_> = (0..20).map(|_| Permutation::random(4, &mut rng)).collect();
        let (w, trace) = run_sgg(
            |t, _| x0.apply_permutation(&perms[t]).unwrap(),
            &HalfSquaredDistance,
            init,
            std::slice::from_ref(&x0),
            [x0.length()],
            &cfg,
        )
        .unwrap();
        let risks = trace.risks();
        assert_eq!(risks.len(), 21);
        for pair in risks.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        assert!(crate::alignment::distance(&w, &x0, &cfg.solver).unwrap() < 1e-12);
    }

    #[test]
    fn euclidean_reduction_matches_scalar_sgd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cfg = SggConfig {
            iterations: 300,
            radius: Some(2.0),
            checkpoint_every: 0,
            ..SggConfig::default()
        };
        let (_, trace) = run_sgg(
            |t, _| scalar(xs[t]),
            &HalfSquaredDistance,
            scalar(0.0),
            &[],
            [],
            &cfg,
        )
        .unwrap();
        let mut w: f64 = 0.0;
        let mut direct = Vec::new();
        for (t, &x) in xs.iter().enumerate() {
            let eta = cfg.schedule.eta(t);
            w -= eta * (w - x);
            w = w.clamp(-2.0, 2.0);
            direct.push(w);
        }
        let last = trace.checkpoints.last().unwrap().iterate.as_slice()[0];
        assert!((last - direct[299]).abs() < 1e-12);
        assert_eq!(trace.checkpoints.len(), 2);
    }

    #[test]
    fn csv_layout() {
        let cfg = SggConfig {
            iterations: 4,
            checkpoint_every: 2,
            ..SggConfig::default()
        };
        let data = [scalar(1.0)];
        let (_, trace) = run_sgg(|_, _| scalar(1.0), &HalfSquaredDistance, scalar(0.0), &data, [1.0], &cfg).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,eta,risk,step_norm,stationarity");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,0.5,0,1"));
    }

    #[test]
    fn solver_errors_carry_iteration() {
        let cfg = SggConfig {
            iterations: 3,
            solver: SolverConfig {
                exact_max_order: 2,
                ..SolverConfig::exact()
            },
            ..SggConfig::default()
        };
        let g = AttributedGraph::zeros(3, 1);
        let err = run_sgg(|_, _| g.clone(), &HalfSquaredDistance, g.clone(), &[], [], &cfg).unwrap_err();
        assert!(matches!(err, Error::AtIteration { iteration: 0, .. }));
    }
}
