//! Desk-scale experiments with CSV outputs and a replayable manifest.
//!
//! An experiment is fully described by an [`ExperimentConfig`]. Running it
//! writes its CSV and JSON artifacts into `output_dir` together with
//! `manifest.json`, which records the resolved configuration and the
//! SHA-256 of every artifact. Re-running the recorded configuration
//! reproduces the artifacts byte for byte.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{self, SolverConfig};
use crate::datagen::{self, MixtureSpec, PerturbationSpec};
use crate::error::{Error, Result};
use crate::gendiff::{self, Distortion, LossKind, LossPoint, Verdict};
use crate::graph::AttributedGraph;
use crate::io;
use crate::learners::{self, CentroidInit};
use crate::sgg::{SggConfig, StepSchedule};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Added to a seed to draw the held-out sample from a separate stream.
const HELD_OUT_SALT: u64 = 0x4e1d_0u64 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MeanConsistency,
    Quantize,
    Adaline,
    DistanceMatrix,
    Gradcheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MeanConsistency => "mean_consistency",
            ExperimentKind::Quantize => "quantize",
            ExperimentKind::Adaline => "adaline",
            ExperimentKind::DistanceMatrix => "distance_matrix",
            ExperimentKind::Gradcheck => "gradcheck",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::MeanConsistency,
            ExperimentKind::Quantize,
            ExperimentKind::Adaline,
            ExperimentKind::DistanceMatrix,
            ExperimentKind::Gradcheck,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::config("kind", format!("unknown experiment {s:?}")))
    }
}

/// Where the graphs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A dataset file; labels, when present, are used as classes.
    Dataset { path: PathBuf },
    Perturbation { spec: PerturbationSpec },
    Mixture { spec: MixtureSpec },
    TwoClass {
        positive: PerturbationSpec,
        negative: PerturbationSpec,
    },
    /// Random dense graphs, used for gradient checks.
    Random { order: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub data: DataSource,
    /// Solver used for evaluation (errors, assignments, accuracy).
    pub solver: SolverConfig,
    /// Training configuration, including the training solver.
    pub sgg: SggConfig,
    pub output_dir: PathBuf,
    /// One run per seed. The seed drives the data stream and the SGG run.
    pub seeds: Vec<u64>,
    /// Sample sizes for mean consistency.
    pub sizes: Vec<usize>,
    /// Training sample size (graphs per seed, or points per loss).
    pub count: usize,
    pub held_out: usize,
    pub k: usize,
    pub distortion: Distortion,
    pub losses: Vec<LossKind>,
    pub fd_step: f64,
    pub fd_tol: f64,
}

impl ExperimentConfig {
    /// Bundled configuration for each kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            kind,
            data: DataSource::Perturbation {
                spec: datagen::perturbed_orbit_preset(0),
            },
            solver: SolverConfig::exact(),
            sgg: SggConfig {
                checkpoint_every: 0,
                ..SggConfig::default()
            },
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
            seeds: (0..10).collect(),
            sizes: vec![10, 50, 250],
            count: 200,
            held_out: 50,
            k: 3,
            distortion: Distortion::Sq,
            losses: LossKind::ALL.to_vec(),
            fd_step: 1e-6,
            fd_tol: 1e-5,
        };
        match kind {
            ExperimentKind::MeanConsistency => ExperimentConfig {
                sgg: SggConfig {
                    schedule: StepSchedule::harmonic(),
                    checkpoint_every: 0,
                    solver: SolverConfig::heuristic(8, 0),
                    ..SggConfig::default()
                },
                ..base
            },
            ExperimentKind::Quantize => ExperimentConfig {
                data: DataSource::Mixture {
                    spec: datagen::three_cluster_preset(0),
                },
                count: 300,
                held_out: 60,
                sgg: SggConfig {
                    iterations: 300,
                    checkpoint_every: 50,
                    ..SggConfig::default()
                },
                ..base
            },
            ExperimentKind::Adaline => {
                let (positive, negative) = datagen::two_class_preset();
                ExperimentConfig {
                    data: DataSource::TwoClass { positive, negative },
                    sgg: SggConfig {
                        schedule: StepSchedule {
                            eta0: 0.05,
                            tau: 100.0,
                            power: 1.0,
                        },
                        iterations: 2000,
                        checkpoint_every: 500,
                        ..SggConfig::default()
                    },
                    ..base
                }
            }
            ExperimentKind::DistanceMatrix => ExperimentConfig {
                count: 20,
                seeds: vec![0],
                ..base
            },
            ExperimentKind::Gradcheck => ExperimentConfig {
                data: DataSource::Random { order: 4, dim: 2 },
                count: 20,
                seeds: vec![0],
                ..base
            },
        }
    }

    /// Parses a possibly partial JSON configuration on top of the defaults
    /// for `kind` (or the `kind` named in the JSON). Nested objects merge
    /// key by key; `data` is replaced as a whole.
    pub fn from_partial_json(text: &str, kind: Option<ExperimentKind>, context: &str) -> Result<Self> {
        let user: serde_json::Value = io::from_json_str(text, context)?;
        let obj = user
            .as_object()
            .ok_or_else(|| Error::config("config", "expected a JSON object"))?;
        let named = match obj.get("kind") {
            Some(v) => Some(
                v.as_str()
                    .ok_or_else(|| Error::config("kind", "expected a string"))?
                    .parse::<ExperimentKind>()?,
            ),
            None => None,
        };
        let kind = match (kind, named) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config(
                    "kind",
                    format!("config says {:?} but {:?} was requested", b.name(), a.name()),
                ))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::config("kind", "missing experiment kind")),
        };
        let mut merged = serde_json::to_value(ExperimentConfig::default_for(kind)).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        merge(&mut merged, user);
        serde_json::from_value(merged).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.sgg.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let need = |ok: bool, field: &str, reason: &str| if ok { Ok(()) } else { Err(Error::config(field, reason)) };
        match self.kind {
            ExperimentKind::MeanConsistency => {
                need(!self.sizes.is_empty() && !self.sizes.contains(&0), "sizes", "need positive sample sizes")?;
                need(
                    matches!(self.data, DataSource::Perturbation { .. }),
                    "data",
                    "mean_consistency needs a perturbation source (the seed graph is the reference)",
                )
            }
            ExperimentKind::Quantize => {
                need(self.k >= 1, "k", "must be at least 1")?;
                need(self.count >= self.k, "count", "need at least k training graphs")
            }
            ExperimentKind::Adaline => need(self.count >= 1, "count", "must be at least 1"),
            ExperimentKind::DistanceMatrix => Ok(()),
            ExperimentKind::Gradcheck => {
                need(self.count >= 1, "count", "must be at least 1")?;
                need(self.fd_step > 0.0, "fd_step", "must be positive")?;
                need(
                    matches!(self.data, DataSource::Random { .. }),
                    "data",
                    "gradcheck needs a random source",
                )
            }
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (key, value) in p {
                match b.get_mut(&key) {
                    Some(slot) if key != "data" => merge(slot, value),
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRow {
    pub n: usize,
    pub seed: u64,
    pub error: f64,
    /// Distance of the first sample to the seed graph.
    pub first_sample_error: f64,
}

/// Error of the mean estimate against the seed graph for every size and
/// seed. Each seed draws one stream; size `N` uses its first `N` graphs in
/// a single pass.
pub fn mean_consistency(cfg: &ExperimentConfig) -> Result<Vec<MeanRow>> {
    let DataSource::Perturbation { spec } = &cfg.data else {
        return Err(Error::config("data", "mean_consistency needs a perturbation source"));
    };
    let max_n = cfg.sizes.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let stream = datagen::sample(&PerturbationSpec { rng_seed: seed, ..spec.clone() }, max_n)?;
        let first_sample_error = alignment::distance(&stream[0], &spec.seed_graph, &cfg.solver)?;
        for &n in &cfg.sizes {
            let sgg = SggConfig {
                iterations: n,
                rng_seed: seed,
                ..cfg.sgg.clone()
            };
            let (estimate, _) = learners::estimate_mean(&stream[..n], &[], &sgg)?;
            rows.push(MeanRow {
                n,
                seed,
                error: alignment::distance(&estimate, &spec.seed_graph, &cfg.solver)?,
                first_sample_error,
            });
        }
    }
    Ok(rows)
}

/// Median of `error` over seeds for each size, in `sizes` order.
pub fn median_errors(rows: &[MeanRow], sizes: &[usize]) -> Vec<f64> {
    sizes
        .iter()
        .map(|&n| median(rows.iter().filter(|r| r.n == n).map(|r| r.error).collect()))
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Graphs with integer class labels. Dataset labels of `±1` map `+1` to
/// class 0 and `-1` to class 1; other labels must be nonnegative integers.
fn classed_graphs(cfg: &ExperimentConfig, seed: u64, count: usize) -> Result<Vec<(AttributedGraph, usize)>> {
    match &cfg.data {
        DataSource::Mixture { spec } => datagen::sample_mixture(&MixtureSpec { rng_seed: seed, ..spec.clone() }, count),
        DataSource::TwoClass { positive, negative } => Ok(datagen::two_class_adaline_task(positive, negative, count, seed)?
            .into_iter()
            .map(|(g, y)| (g, usize::from(y < 0.0)))
            .collect()),
        DataSource::Perturbation { spec } => Ok(datagen::sample(&PerturbationSpec { rng_seed: seed, ..spec.clone() }, count)?
            .into_iter()
            .map(|g| (g, 0))
            .collect()),
        DataSource::Dataset { path } => {
            let ds = io::read_dataset(path)?;
            let labels = match &ds.labels {
                Some(l) if l.iter().all(|&y| y == 1.0 || y == -1.0) => l.iter().map(|&y| usize::from(y < 0.0)).collect(),
                Some(l) => l
                    .iter()
                    .map(|&y| {
                        if y >= 0.0 && y.fract() == 0.0 {
                            Ok(y as usize)
                        } else {
                            Err(Error::config("labels", format!("cannot use {y} as a class")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => vec![0; ds.len()],
            };
            Ok(ds.graphs.into_iter().zip(labels).collect())
        }
        DataSource::Random { order, dim } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| (LossPoint::random(LossKind::Kernel, *order, *dim, 1, &mut rng).datum, 0))
                .collect())
        }
    }
}

fn split(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<(AttributedGraph, usize)>, Vec<(AttributedGraph, usize)>)> {
    if let DataSource::Dataset { .. } = cfg.data {
        let all = classed_graphs(cfg, seed, 0)?;
        return Ok((all.clone(), all));
    }
    let train = classed_graphs(cfg, seed, cfg.count)?;
    let held = if cfg.held_out > 0 {
        classed_graphs(cfg, seed.wrapping_add(HELD_OUT_SALT), cfg.held_out)?
    } else {
        Vec::new()
    };
    Ok((train, held))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeRun {
    pub seed: u64,
    pub purity: f64,
    pub batch_purity: f64,
    /// Held-out distortion at the first and last checkpoints.
    pub first_risk: Option<f64>,
    pub final_risk: Option<f64>,
    pub codebook: learners::Codebook,
    pub trace_csv: String,
}

pub fn quantize_runs(cfg: &ExperimentConfig) -> Result<Vec<QuantizeRun>> {
    cfg.seeds
        .iter()
        .map(|&seed| {
            let (train, held) = split(cfg, seed)?;
            let graphs: Vec<_> = train.iter().map(|(g, _)| g.clone()).collect();
            let classes: Vec<_> = train.iter().map(|(_, c)| *c).collect();
            let held: Vec<_> = held.into_iter().map(|(g, _)| g).collect();
            let sgg = SggConfig {
                rng_seed: seed,
                ..cfg.sgg.clone()
            };
            let (codebook, trace) =
                learners::quantize_with_init(&graphs, &held, cfg.k, &sgg, cfg.distortion, CentroidInit::default())?;
            let purity = learners::purity(&learners::assign(&graphs, &codebook, &cfg.solver)?, &classes);
            let batch = learners::batch_kcentroids(&graphs, cfg.k, 5, &sgg)?;
            let risks = trace.risks();
            Ok(QuantizeRun {
                seed,
                purity,
                batch_purity: learners::purity(&batch.assignments, &classes),
                first_risk: risks.first().copied(),
                final_risk: risks.last().copied(),
                codebook,
                trace_csv: trace.to_csv(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdalineRun {
    pub seed: u64,
    pub accuracy: f64,
    pub held_out_accuracy: Option<f64>,
    pub margins: datagen::MarginReport,
    pub model: learners::AdalineModel,
    pub trace_csv: String,
}

fn signed(data: Vec<(AttributedGraph, usize)>) -> Vec<(AttributedGraph, f64)> {
    data.into_iter()
        .map(|(g, c)| (g, if c == 0 { 1.0 } else { -1.0 }))
        .collect()
}

pub fn adaline_runs(cfg: &ExperimentConfig) -> Result<Vec<AdalineRun>> {
    cfg.seeds
        .iter()
        .map(|&seed| {
            let (train, held) = split(cfg, seed)?;
            let (train, held) = (signed(train), signed(held));
            let sgg = SggConfig {
                rng_seed: seed,
                ..cfg.sgg.clone()
            };
            let (model, trace) = learners::adaline_train(&train, &held, &sgg)?;
            Ok(AdalineRun {
                seed,
                accuracy: learners::accuracy(&model, &train, &cfg.solver)?,
                held_out_accuracy: if held.is_empty() {
                    None
                } else {
                    Some(learners::accuracy(&model, &held, &cfg.solver)?)
                },
                margins: datagen::margin_report(&model, &train, &cfg.solver)?,
                model,
                trace_csv: trace.to_csv(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub seed: u64,
    pub loss: LossKind,
    pub point: usize,
    pub loss_value: f64,
    pub deviation: f64,
    pub verdict: Verdict,
}

pub fn gradcheck_rows(cfg: &ExperimentConfig) -> Result<Vec<GradcheckRow>> {
    let DataSource::Random { order, dim } = cfg.data else {
        return Err(Error::config("data", "gradcheck needs a random source"));
    };
    let mut points = Vec::new();
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &loss in &cfg.losses {
            for point in 0..cfg.count {
                points.push((seed, point, LossPoint::random(loss, order, dim, cfg.k, &mut rng)));
            }
        }
    }
    points
        .par_iter()
        .map(|(seed, point, lp)| {
            let r = gendiff::finite_diff_check(lp, &cfg.solver, cfg.fd_step, cfg.fd_tol)?;
            Ok(GradcheckRow {
                seed: *seed,
                loss: lp.kind,
                point: *point,
                loss_value: r.loss_value,
                deviation: r.deviation,
                verdict: r.verdict,
            })
        })
        .collect()
}

/// Pairwise distances as `(i, j, d)` for `i < j`.
pub fn distance_matrix(graphs: &[AttributedGraph], cfg: &SolverConfig) -> Result<Vec<(usize, usize, f64)>> {
    let pairs: Vec<_> = (0..graphs.len())
        .flat_map(|i| (i + 1..graphs.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| Ok((i, j, alignment::distance(&graphs[i], &graphs[j], cfg)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        io::read_json(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Outputs {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        io::write_text(&self.dir.join(name), text)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs the experiment, writes its artifacts and manifest, and returns the
/// manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let mut out = Outputs {
        dir: cfg.output_dir.clone(),
        artifacts: Vec::new(),
    };
    match cfg.kind {
        ExperimentKind::MeanConsistency => {
            let rows = mean_consistency(cfg)?;
            let mut csv = String::from("N,seed,error\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{}\n", r.n, r.seed, r.error));
            }
            out.write("mean_consistency.csv", &csv)?;
            let mut base = String::from("seed,first_sample_error\n");
            for r in rows.iter().filter(|r| r.n == cfg.sizes[0]) {
                base.push_str(&format!("{},{}\n", r.seed, r.first_sample_error));
            }
            out.write("first_sample_error.csv", &base)?;
        }
        ExperimentKind::Quantize => {
            let runs = quantize_runs(cfg)?;
            let mut csv = String::from("seed,purity,batch_purity,first_risk,final_risk\n");
            for r in &runs {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.seed,
                    r.purity,
                    r.batch_purity,
                    opt(r.first_risk),
                    opt(r.final_risk)
                ));
                out.write(&format!("quantize_trace_seed{}.csv", r.seed), &r.trace_csv)?;
                out.write(
                    &format!("codebook_seed{}.json", r.seed),
                    &io::to_json_string(&r.codebook.centroids, "codebook")?,
                )?;
            }
            out.write("quantize.csv", &csv)?;
        }
        ExperimentKind::Adaline => {
            let runs = adaline_runs(cfg)?;
            let mut csv = String::from("seed,accuracy,held_out_accuracy,min_margin,mean_margin\n");
            for r in &runs {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.seed,
                    r.accuracy,
                    opt(r.held_out_accuracy),
                    r.margins.min_margin,
                    r.margins.mean_margin
                ));
                out.write(&format!("adaline_trace_seed{}.csv", r.seed), &r.trace_csv)?;
                out.write(&format!("adaline_seed{}.json", r.seed), &io::adaline_to_json(&r.model)?)?;
            }
            out.write("adaline.csv", &csv)?;
        }
        ExperimentKind::DistanceMatrix => {
            let graphs: Vec<_> = classed_graphs(cfg, cfg.seeds[0], cfg.count)?
                .into_iter()
                .map(|(g, _)| g)
                .collect();
            let mut csv = String::from("i,j,distance\n");
            for (i, j, d) in distance_matrix(&graphs, &cfg.solver)? {
                csv.push_str(&format!("{i},{j},{d}\n"));
            }
            out.write("distance_matrix.csv", &csv)?;
        }
        ExperimentKind::Gradcheck => {
            let mut csv = String::from("seed,loss,point,loss_value,deviation,verdict\n");
            for r in gradcheck_rows(cfg)? {
                let verdict = match r.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "fail",
                    Verdict::NonsmoothPoint => "nonsmooth_point",
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.seed,
                    r.loss.name(),
                    r.point,
                    r.loss_value,
                    r.deviation,
                    verdict
                ));
            }
            out.write("gradcheck.csv", &csv)?;
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        artifacts: out.artifacts,
    };
    io::write_json(&cfg.output_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Paths whose recomputed hash differs from the manifest.
pub fn mismatched_artifacts(recorded: &Manifest, rerun: &Manifest) -> Vec<String> {
    recorded
        .artifacts
        .iter()
        .filter(|a| !rerun.artifacts.iter().any(|b| b == *a))
        .map(|a| a.path.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_merges_onto_defaults() {
        let cfg = ExperimentConfig::from_partial_json(
            r#"{"seeds": [3], "sgg": {"iterations": 7}, "solver": {"mode": "heuristic"}}"#,
            Some(ExperimentKind::Quantize),
            "t",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.sgg.iterations, 7);
        assert_eq!(cfg.sgg.checkpoint_every, 50);
        assert_eq!(cfg.solver.mode, alignment::SolverMode::Heuristic);
        assert!(matches!(cfg.data, DataSource::Mixture { .. }));

        let err = ExperimentConfig::from_partial_json(r#"{"kind": "adaline"}"#, Some(ExperimentKind::Quantize), "t")
            .unwrap_err();
        assert!(err.to_string().contains("kind"));
        let err = ExperimentConfig::from_partial_json(r#"{"kind": "quantize", "bogus": 1}"#, None, "t").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn default_configs_roundtrip_and_validate() {
        for kind in ["mean_consistency", "quantize", "adaline", "distance_matrix", "gradcheck"] {
            let kind: ExperimentKind = kind.parse().unwrap();
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            let text = io::to_json_string(&cfg, "c").unwrap();
            assert_eq!(ExperimentConfig::from_partial_json(&text, None, "c").unwrap(), cfg);
        }
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn small_runs_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Gradcheck);
        cfg.count = 2;
        cfg.output_dir = dir.path().join("a");
        let first = run(&cfg).unwrap();
        cfg.output_dir = dir.path().join("b");
        let second = run(&cfg).unwrap();
        assert!(mismatched_artifacts(&first, &second).is_empty());
        let a = std::fs::read(dir.path().join("a/gradcheck.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b/gradcheck.csv")).unwrap();
        assert_eq!(a, b);
        assert_eq!(Manifest::read(&dir.path().join("a").join(MANIFEST_FILE)).unwrap(), first);
    }
}
