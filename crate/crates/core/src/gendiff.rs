//! Generalized gradients of the orbifold losses.
//!
//! Every loss here is built from the alignment kernel `k(x, w)`, which as a
//! function of the representative `w` is a maximum of finitely many linear
//! functions `w ↦ <P·x, w>`. A generalized gradient is therefore selected
//! from the maximizing permutation (the *witness*): the kernel's subgradient
//! is the aligned input `P*·x`, and the remaining losses follow by the chain
//! rule. Minimum-type losses (quantization) select the winning centroid the
//! same way.
//!
//! Only a single element of the subdifferential is produced. At points where
//! several distinct alignments attain the maximum the loss is not
//! differentiable and the selection depends on the solver's deterministic
//! tie-breaking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{self, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Permutation};

/// Kernel values (and distances) closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    /// Same shape as the parameter representative.
    pub matrix: AttributedGraph,
    /// Alignment of the datum onto the (winning) parameter.
    pub witness: Permutation,
    /// Winning centroid for quantization losses.
    pub centroid: Option<usize>,
    pub loss_value: f64,
}

/// `w ↦ k(x, w)`; the subgradient is the aligned datum.
pub fn subgrad_kernel(x: &AttributedGraph, w: &AttributedGraph, cfg: &SolverConfig) -> Result<Subgradient> {
    let r = alignment::kernel(x, w, cfg)?;
    Ok(Subgradient {
        matrix: x.permuted(&r.witness),
        witness: r.witness,
        centroid: None,
        loss_value: r.kernel_value,
    })
}

/// `w ↦ ½ d(x, w)²` with subgradient `w - P*·x`.
pub fn subgrad_sq_half_dist(x: &AttributedGraph, w: &AttributedGraph, cfg: &SolverConfig) -> Result<Subgradient> {
    let r = alignment::distance_aligned(x, w, cfg)?;
    let matrix = w.sub(&x.permuted(&r.alignment.witness))?;
    Ok(Subgradient {
        matrix,
        witness: r.alignment.witness,
        centroid: None,
        loss_value: 0.5 * r.distance * r.distance,
    })
}

/// `w ↦ d(x, w)` with subgradient `(w - P*·x) / d`, or zero at `d = 0`.
pub fn subgrad_dist(x: &AttributedGraph, w: &AttributedGraph, cfg: &SolverConfig) -> Result<Subgradient> {
    let r = alignment::distance_aligned(x, w, cfg)?;
    let d = r.distance;
    let matrix = if d < TIE_TOL {
        AttributedGraph::zeros(w.order(), w.dim())
    } else {
        let mut m = w.sub(&x.permuted(&r.alignment.witness))?;
        m.scale(1.0 / d);
        m
    };
    Ok(Subgradient {
        matrix,
        witness: r.alignment.witness,
        centroid: None,
        loss_value: d,
    })
}

pub fn check_label(label: f64) -> Result<()> {
    if label == 1.0 || label == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLabel(label))
    }
}

/// Adaline loss `(y - k(x, w) - b)²`. Returns the weight subgradient and the
/// bias derivative; both point uphill.
pub fn subgrad_adaline(
    x: &AttributedGraph,
    label: f64,
    w: &AttributedGraph,
    bias: f64,
    cfg: &SolverConfig,
) -> Result<(Subgradient, f64)> {
    check_label(label)?;
    let k = alignment::kernel(x, w, cfg)?;
    let residual = label - (k.kernel_value + bias);
    let mut matrix = x.permuted(&k.witness);
    matrix.scale(-2.0 * residual);
    Ok((
        Subgradient {
            matrix,
            witness: k.witness,
            centroid: None,
            loss_value: residual * residual,
        },
        -2.0 * residual,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distortion {
    /// `½ d²`, whose subgradient is `w* - P*·x`.
    Sq,
    /// `d`.
    Dist,
}

/// Index of the nearest centroid (lowest index on ties) and all distances.
pub fn nearest_centroid(
    x: &AttributedGraph,
    codebook: &[AttributedGraph],
    cfg: &SolverConfig,
) -> Result<(usize, Vec<f64>)> {
    if codebook.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let dists = codebook
        .iter()
        .map(|c| alignment::distance(x, c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, &d) in dists.iter().enumerate().skip(1) {
        if d < dists[winner] {
            winner = i;
        }
    }
    Ok((winner, dists))
}

/// Distortion `min_i d(x, w_i)` (or its half square). The subgradient is
/// taken with respect to the winning centroid; all others get zero.
pub fn subgrad_quantize(
    x: &AttributedGraph,
    codebook: &[AttributedGraph],
    cfg: &SolverConfig,
    distortion: Distortion,
) -> Result<(usize, Subgradient)> {
    let (winner, _) = nearest_centroid(x, codebook, cfg)?;
    let w = &codebook[winner];
    let mut sg = match distortion {
        Distortion::Sq => subgrad_sq_half_dist(x, w, cfg)?,
        Distortion::Dist => subgrad_dist(x, w, cfg)?,
    };
    sg.centroid = Some(winner);
    Ok((winner, sg))
}

/// Forward pass of a scalar-valued map `f(x; w, b)` on graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    pub value: f64,
    /// Generalized gradient of `f` with respect to the weight graph.
    pub weight_grad: AttributedGraph,
    pub bias_grad: f64,
    pub witness: Permutation,
}

/// A generalized differentiable map from graphs to reals, parameterized by a
/// weight graph and a bias. Implementors evaluate their lift at an optimal
/// alignment and return a gradient selection with respect to the parameters.
pub trait ScalarMap: Sync {
    fn forward(&self, x: &AttributedGraph, weight: &AttributedGraph, bias: f64, cfg: &SolverConfig)
        -> Result<MapOutput>;
}

/// `f(x; w, b) = k(x, w) + b`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelAffineMap;

impl ScalarMap for KernelAffineMap {
    fn forward(
        &self,
        x: &AttributedGraph,
        weight: &AttributedGraph,
        bias: f64,
        cfg: &SolverConfig,
    ) -> Result<MapOutput> {
        let k = alignment::kernel(x, weight, cfg)?;
        Ok(MapOutput {
            value: k.kernel_value + bias,
            weight_grad: x.permuted(&k.witness),
            bias_grad: 1.0,
            witness: k.witness,
        })
    }
}

/// Mean-squared error `½ (y - f(x; w, b))²` through the chain rule:
/// `-(y - f) · ∂f`.
pub fn subgrad_mse_map(
    model: &dyn ScalarMap,
    x: &AttributedGraph,
    target: f64,
    w: &AttributedGraph,
    bias: f64,
    cfg: &SolverConfig,
) -> Result<(Subgradient, f64)> {
    let out = model.forward(x, w, bias, cfg)?;
    out.weight_grad.check_same_shape(w)?;
    let residual = target - out.value;
    let mut matrix = out.weight_grad;
    matrix.scale(-residual);
    Ok((
        Subgradient {
            matrix,
            witness: out.witness,
            centroid: None,
            loss_value: 0.5 * residual * residual,
        },
        -residual * out.bias_grad,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Kernel,
    SqHalfDist,
    Dist,
    Adaline,
    QuantizeSq,
    QuantizeDist,
    MseMap,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Kernel,
        LossKind::SqHalfDist,
        LossKind::Dist,
        LossKind::Adaline,
        LossKind::QuantizeSq,
        LossKind::QuantizeDist,
        LossKind::MseMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Kernel => "kernel",
            LossKind::SqHalfDist => "sq_half_dist",
            LossKind::Dist => "dist",
            LossKind::Adaline => "adaline",
            LossKind::QuantizeSq => "quantize_sq",
            LossKind::QuantizeDist => "quantize_dist",
            LossKind::MseMap => "mse_map",
        }
    }

    fn has_bias(self) -> bool {
        matches!(self, LossKind::Adaline | LossKind::MseMap)
    }

    fn is_quantize(self) -> bool {
        matches!(self, LossKind::QuantizeSq | LossKind::QuantizeDist)
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("loss", format!("unknown loss kind {s:?}")))
    }
}

/// A loss evaluated at one datum, as a function of the parameters.
///
/// `params` holds one graph, or the whole codebook for quantization losses.
/// `bias` and `label` are used by the adaline and MSE losses only.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPoint {
    pub kind: LossKind,
    pub params: Vec<AttributedGraph>,
    pub bias: f64,
    pub datum: AttributedGraph,
    pub label: f64,
}

impl LossPoint {
    fn check(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::EmptyCodebook);
        }
        if !self.kind.is_quantize() && self.params.len() != 1 {
            return Err(Error::config(
                "params",
                format!("{} takes exactly one parameter graph", self.kind.name()),
            ));
        }
        for p in &self.params {
            p.check_same_shape(&self.datum)?;
        }
        Ok(())
    }

    /// A point with independent uniform cells in `[-1, 1)`. Quantization
    /// losses get `centroids` parameter graphs, the others one. Adaline
    /// labels are a fair `±1`; MSE targets are uniform in `[-1, 1)`.
    pub fn random<R: Rng + ?Sized>(kind: LossKind, order: usize, dim: usize, centroids: usize, rng: &mut R) -> Self {
        let graph = |rng: &mut R| {
            let cells = (0..order * order * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            AttributedGraph::from_cells(order, dim, cells).expect("cell count matches")
        };
        let count = if kind.is_quantize() { centroids.max(1) } else { 1 };
        let params = (0..count).map(|_| graph(rng)).collect();
        let datum = graph(rng);
        let bias = if kind.has_bias() { rng.random_range(-1.0..1.0) } else { 0.0 };
        let label = match kind {
            LossKind::Adaline => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            LossKind::MseMap => rng.random_range(-1.0..1.0),
            _ => 0.0,
        };
        LossPoint {
            kind,
            params,
            bias,
            datum,
            label,
        }
    }

    /// Loss value at the current parameters.
    pub fn loss(&self, cfg: &SolverConfig) -> Result<f64> {
        self.selection(cfg).map(|(sg, _)| sg.loss_value)
    }

    /// Selected subgradient and bias derivative.
    pub fn selection(&self, cfg: &SolverConfig) -> Result<(Subgradient, f64)> {
        self.check()?;
        let w = &self.params[0];
        let x = &self.datum;
        Ok(match self.kind {
            LossKind::Kernel => (subgrad_kernel(x, w, cfg)?, 0.0),
            LossKind::SqHalfDist => (subgrad_sq_half_dist(x, w, cfg)?, 0.0),
            LossKind::Dist => (subgrad_dist(x, w, cfg)?, 0.0),
            LossKind::Adaline => subgrad_adaline(x, self.label, w, self.bias, cfg)?,
            LossKind::QuantizeSq => (subgrad_quantize(x, &self.params, cfg, Distortion::Sq)?.1, 0.0),
            LossKind::QuantizeDist => (subgrad_quantize(x, &self.params, cfg, Distortion::Dist)?.1, 0.0),
            LossKind::MseMap => subgrad_mse_map(&KernelAffineMap, x, self.label, w, self.bias, cfg)?,
        })
    }

    /// Flattened gradient over all parameter coordinates (then the bias).
    pub fn flat_gradient(&self, cfg: &SolverConfig) -> Result<Vec<f64>> {
        let (sg, bias_grad) = self.selection(cfg)?;
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            if sg.centroid.unwrap_or(0) == i {
                out.extend_from_slice(sg.matrix.as_slice());
            } else {
                out.extend(std::iter::repeat_n(0.0, p.as_slice().len()));
            }
        }
        if self.kind.has_bias() {
            out.push(bias_grad);
        }
        Ok(out)
    }

    fn coordinate_count(&self) -> usize {
        self.params.iter().map(|p| p.as_slice().len()).sum::<usize>() + usize::from(self.kind.has_bias())
    }

    fn perturbed(&self, coord: usize, delta: f64) -> LossPoint {
        let mut lp = self.clone();
        let mut c = coord;
        for p in &mut lp.params {
            let len = p.as_slice().len();
            if c < len {
                p.as_mut_slice()[c] += delta;
                return lp;
            }
            c -= len;
        }
        lp.bias += delta;
        lp
    }

    /// Whether the loss is non-differentiable at this point up to [`TIE_TOL`]:
    /// several distinct optimal alignments, several nearest centroids, or a
    /// zero distance for the unsquared metric. Needs the exact solver's order
    /// cap; beyond it no ties are reported.
    pub fn is_nonsmooth(&self, cfg: &SolverConfig) -> Result<bool> {
        self.check()?;
        if self.datum.order() > cfg.exact_max_order {
            return Ok(false);
        }
        let exact = SolverConfig {
            mode: alignment::SolverMode::Exact,
            ..cfg.clone()
        };
        let winner = if self.kind.is_quantize() {
            let (winner, dists) = nearest_centroid(&self.datum, &self.params, &exact)?;
            let runners_up = dists.iter().filter(|&&d| d <= dists[winner] + TIE_TOL).count();
            if runners_up > 1 {
                return Ok(true);
            }
            if self.kind == LossKind::QuantizeDist && dists[winner] < TIE_TOL {
                return Ok(true);
            }
            winner
        } else {
            0
        };
        let w = &self.params[winner];
        if self.kind == LossKind::Dist && alignment::distance(&self.datum, w, &exact)? < TIE_TOL {
            return Ok(true);
        }
        Ok(alignment::optimal_alignments(&self.datum, w, &exact, TIE_TOL)?.len() > 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NonsmoothPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub loss: LossKind,
    pub loss_value: f64,
    /// Max absolute deviation between central differences and the selected
    /// subgradient; `NaN` when the point was skipped.
    pub deviation: f64,
    pub verdict: Verdict,
}

/// Compares the selected subgradient with central finite differences of the
/// lifted loss. Tie points are not checked and get
/// [`Verdict::NonsmoothPoint`].
pub fn finite_diff_check(lp: &LossPoint, cfg: &SolverConfig, h: f64, tol: f64) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::config("h", "finite-difference step must be positive"));
    }
    let loss_value = lp.loss(cfg)?;
    if lp.is_nonsmooth(cfg)? {
        return Ok(GradCheckReport {
            loss: lp.kind,
            loss_value,
            deviation: f64::NAN,
            verdict: Verdict::NonsmoothPoint,
        });
    }
    let grad = lp.flat_gradient(cfg)?;
    let mut deviation: f64 = 0.0;
    for c in 0..lp.coordinate_count() {
        let up = lp.perturbed(c, h).loss(cfg)?;
        let down = lp.perturbed(c, -h).loss(cfg)?;
        let fd = (up - down) / (2.0 * h);
        deviation = deviation.max((fd - grad[c]).abs());
    }
    Ok(GradCheckReport {
        loss: lp.kind,
        loss_value,
        deviation,
        verdict: if deviation < tol { Verdict::Pass } else { Verdict::Fail },
    })
}
