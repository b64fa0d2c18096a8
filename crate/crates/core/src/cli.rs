//! Command-line interface.
//!
//! Every subcommand prints a JSON document on stdout. Exit status is 0 on
//! success, 2 on a usage error and 1 on a runtime error.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::alignment::{self, SolverConfig, SolverMode};
use crate::datagen::{self, MixtureSpec, PerturbationSpec};
use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig, ExperimentKind, Manifest, MANIFEST_FILE};
use crate::gendiff::{self, Distortion, LossKind, LossPoint};
use crate::graph::{AttributedGraph, GraphDataset};
use crate::io;
use crate::learners::{self, CentroidInit};
use crate::sgg::{SggConfig, StepSchedule};

pub const THREADS_ENV: &str = "ORBILEARN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "orbilearn", version, about = "Learning on attributed graphs modulo vertex relabeling")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a dataset from a perturbation, mixture or two-class spec
    Gen(GenArgs),
    /// Optimal alignment kernel of two graphs
    Align(PairArgs),
    /// Orbit distance of two graphs
    Dist(PairArgs),
    /// Edit cost of the best vertex correspondence
    Ged(PairArgs),
    /// Estimate the mean graph of a dataset
    Mean(MeanArgs),
    /// Learn a codebook by online competitive learning
    Quantize(QuantizeArgs),
    /// Train an orbifold adaline on a labeled dataset
    AdalineTrain(TrainArgs),
    /// Classify graphs with a trained adaline
    AdalinePredict(PredictArgs),
    /// Finite-difference check of the selected subgradients
    Gradcheck(GradcheckArgs),
    /// Run a bundled experiment or replay one from its manifest
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Heuristic,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Alignment solver
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Heuristic restarts
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Largest order the exact solver accepts
    #[arg(long, default_value_t = 10)]
    exact_max_order: usize,
    /// Seed for heuristic restarts and training
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            mode: match self.mode {
                ModeArg::Exact => SolverMode::Exact,
                ModeArg::Heuristic => SolverMode::Heuristic,
            },
            exact_max_order: self.exact_max_order,
            restarts: self.restarts,
            rng_seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long, value_name = "GRAPH.json")]
    a: PathBuf,
    #[arg(long, value_name = "GRAPH.json")]
    b: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SggArgs {
    /// JSON file with SGG settings; flags below override it
    #[arg(long, value_name = "FILE")]
    sgg_config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    /// Use the step size 1/(t+1)
    #[arg(long, conflicts_with_all = ["eta0", "tau", "power"])]
    harmonic: bool,
    /// Projection radius (default: ten times the largest sample length)
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Write the checkpoint trace as CSV
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Held-out dataset evaluated at checkpoints
    #[arg(long, value_name = "DATA.json")]
    held_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

impl SggArgs {
    fn config(&self) -> Result<SggConfig> {
        let mut cfg = match &self.sgg_config {
            Some(p) => io::read_json::<SggConfig>(p)?,
            None => SggConfig::default(),
        };
        if self.harmonic {
            cfg.schedule = StepSchedule::harmonic();
        }
        let s = &mut cfg.schedule;
        s.eta0 = self.eta0.unwrap_or(s.eta0);
        s.tau = self.tau.unwrap_or(s.tau);
        s.power = self.power.unwrap_or(s.power);
        cfg.iterations = self.iterations.unwrap_or(cfg.iterations);
        cfg.checkpoint_every = self.checkpoint_every.unwrap_or(cfg.checkpoint_every);
        cfg.radius = self.radius.or(cfg.radius);
        cfg.solver = self.solver.config()?;
        cfg.rng_seed = self.solver.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn held_out(&self, like: &GraphDataset) -> Result<Option<GraphDataset>> {
        let Some(path) = &self.held_out else { return Ok(None) };
        let ds = io::read_dataset(path)?;
        let graphs = ds
            .graphs
            .iter()
            .map(|g| g.pad_to_order(like.common_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(GraphDataset::new(graphs, ds.labels)?))
    }
}

#[derive(Args, Debug)]
struct MeanArgs {
    #[arg(long, value_name = "DATA.json")]
    data: PathBuf,
    /// Where to write the mean graph
    #[arg(long, value_name = "GRAPH.json")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sgg: SggArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistortionArg {
    Sq,
    Dist,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    FarthestFirst,
    FirstDistinct,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    #[arg(long, value_name = "DATA.json")]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "sq")]
    distortion: DistortionArg,
    #[arg(long, value_enum, default_value = "farthest-first")]
    init: InitArg,
    /// Where to write the codebook
    #[arg(long, value_name = "CODEBOOK.json")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sgg: SggArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset with labels in {-1, +1}
    #[arg(long, value_name = "DATA.json")]
    data: PathBuf,
    #[arg(long, value_name = "MODEL.json")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sgg: SggArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long, value_name = "MODEL.json")]
    model: PathBuf,
    #[arg(long, value_name = "DATA.json")]
    data: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpecKind {
    Perturbation,
    Mixture,
    TwoClass,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Spec file; the kind is inferred from its fields unless --kind is given
    #[arg(long, value_name = "SPEC.json", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<SpecKind>,
    /// Bundled spec instead of a file
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<SpecKind>,
    #[arg(long)]
    count: usize,
    /// Overrides the spec's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset (stdout when absent)
    #[arg(long, value_name = "DATA.json")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Losses to check (default: all)
    #[arg(long = "loss", value_name = "LOSS")]
    losses: Vec<String>,
    /// Points per loss
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Codebook size for the quantization losses
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// mean_consistency, quantize, adaline, distance_matrix or gradcheck;
    /// optional when the config or manifest names it
    #[arg(required_unless_present_any = ["manifest", "config"])]
    kind: Option<String>,
    /// Partial configuration merged over the bundled defaults
    #[arg(long, value_name = "FILE", conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Replay the configuration recorded in a manifest
    #[arg(long, value_name = "MANIFEST.json")]
    manifest: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return 2;
    }
    match execute(cli.command) {
        Ok(value) => {
            let mut out = std::io::stdout().lock();
            match serde_json::to_string_pretty(&value) {
                Ok(text) => {
                    let _ = writeln!(out, "{text}");
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cmd: Command) -> Result<serde_json::Value> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Align(a) => {
            let (x, y, cfg) = load_pair(&a)?;
            let r = alignment::kernel(&x, &y, &cfg)?;
            Ok(json!({"value": r.kernel_value, "witness": r.witness, "exact": r.exact}))
        }
        Command::Dist(a) => {
            let (x, y, cfg) = load_pair(&a)?;
            let r = alignment::distance_aligned(&x, &y, &cfg)?;
            Ok(json!({"value": r.distance, "witness": r.alignment.witness, "exact": r.alignment.exact}))
        }
        Command::Ged(a) => {
            let (x, y, cfg) = load_pair(&a)?;
            let r = alignment::ged_aligned(&x, &y, &cfg)?;
            Ok(json!({"value": r.cost, "witness": r.witness, "exact": r.exact}))
        }
        Command::Mean(a) => mean(a),
        Command::Quantize(a) => quantize(a),
        Command::AdalineTrain(a) => adaline_train(a),
        Command::AdalinePredict(a) => adaline_predict(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn load_pair(a: &PairArgs) -> Result<(AttributedGraph, AttributedGraph, SolverConfig)> {
    let cfg = a.solver.config()?;
    let x = io::read_graph(&a.a)?;
    let y = io::read_graph(&a.b)?;
    let n = x.order().max(y.order());
    Ok((x.pad_to_order(n)?, y.pad_to_order(n)?, cfg))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|source| Error::Json {
        context: "output".into(),
        source,
    })
}

fn gen(a: GenArgs) -> Result<serde_json::Value> {
    if a.count == 0 {
        return Err(Error::config("count", "must be at least 1"));
    }
    let (kind, value) = match (&a.spec, a.preset) {
        (_, Some(preset)) => {
            let value = match preset {
                SpecKind::Perturbation => to_value(&datagen::perturbed_orbit_preset(0))?,
                SpecKind::Mixture => to_value(&datagen::three_cluster_preset(0))?,
                SpecKind::TwoClass => {
                    let (positive, negative) = datagen::two_class_preset();
                    json!({"positive": to_value(&positive)?, "negative": to_value(&negative)?, "rng_seed": 0})
                }
            };
            (preset, value)
        }
        (Some(path), None) => {
            let value: serde_json::Value = io::read_json(path)?;
            let kind = a.kind.unwrap_or(if value.get("components").is_some() {
                SpecKind::Mixture
            } else if value.get("positive").is_some() {
                SpecKind::TwoClass
            } else {
                SpecKind::Perturbation
            });
            (kind, value)
        }
        (None, None) => return Err(Error::config("spec", "need --spec or --preset")),
    };
    let from = |v: serde_json::Value| -> Result<PerturbationSpec> {
        serde_json::from_value(v).map_err(|source| Error::Json {
            context: "perturbation spec".into(),
            source,
        })
    };
    let (graphs, labels): (Vec<AttributedGraph>, Option<Vec<f64>>) = match kind {
        SpecKind::Perturbation => {
            let mut spec = from(value)?;
            spec.rng_seed = a.seed.unwrap_or(spec.rng_seed);
            (datagen::sample(&spec, a.count)?, None)
        }
        SpecKind::Mixture => {
            let mut spec: MixtureSpec = serde_json::from_value(value).map_err(|source| Error::Json {
                context: "mixture spec".into(),
                source,
            })?;
            spec.rng_seed = a.seed.unwrap_or(spec.rng_seed);
            let draws = datagen::sample_mixture(&spec, a.count)?;
            let labels = draws.iter().map(|(_, c)| *c as f64).collect();
            (draws.into_iter().map(|(g, _)| g).collect(), Some(labels))
        }
        SpecKind::TwoClass => {
            let positive = from(value.get("positive").cloned().unwrap_or_default())?;
            let negative = from(value.get("negative").cloned().unwrap_or_default())?;
            let seed = a.seed.or_else(|| value.get("rng_seed").and_then(|s| s.as_u64())).unwrap_or(0);
            let data = datagen::two_class_adaline_task(&positive, &negative, a.count, seed)?;
            let labels = data.iter().map(|(_, y)| *y).collect();
            (data.into_iter().map(|(g, _)| g).collect(), Some(labels))
        }
    };
    let text = io::dataset_to_json(&graphs, labels.as_deref())?;
    match &a.out {
        Some(path) => {
            io::write_text(path, &text)?;
            Ok(json!({"written": path, "count": graphs.len(), "labeled": labels.is_some()}))
        }
        None => io::from_json_str(&text, "dataset"),
    }
}

fn dataset(path: &Path) -> Result<GraphDataset> {
    io::read_dataset(path)
}

fn write_trace(path: &Option<PathBuf>, csv: &str) -> Result<()> {
    match path {
        Some(p) => io::write_text(p, csv),
        None => Ok(()),
    }
}

fn mean(a: MeanArgs) -> Result<serde_json::Value> {
    let cfg = a.sgg.config()?;
    let ds = dataset(&a.data)?;
    let held = a.sgg.held_out(&ds)?;
    let held = held.map(|h| h.graphs).unwrap_or_default();
    let (m, trace) = learners::estimate_mean(&ds.graphs, &held, &cfg)?;
    write_trace(&a.sgg.trace, &trace.to_csv())?;
    if let Some(out) = &a.out {
        io::write_graph(out, &m)?;
    }
    let codebook = learners::Codebook::new(vec![m.clone()])?;
    let half_sq = learners::mean_distortion(&ds.graphs, &codebook, &cfg.solver, Distortion::Sq)?;
    Ok(json!({
        "half_sq_risk": half_sq,
        "sq_risk": 2.0 * half_sq,
        "iterations": cfg.iterations,
        "radius": trace.ball.radius,
        "mean": m,
    }))
}

fn quantize(a: QuantizeArgs) -> Result<serde_json::Value> {
    let cfg = a.sgg.config()?;
    let ds = dataset(&a.data)?;
    let held = a.sgg.held_out(&ds)?.map(|h| h.graphs).unwrap_or_default();
    let distortion = match a.distortion {
        DistortionArg::Sq => Distortion::Sq,
        DistortionArg::Dist => Distortion::Dist,
    };
    let init = match a.init {
        InitArg::FarthestFirst => CentroidInit::FarthestFirst,
        InitArg::FirstDistinct => CentroidInit::FirstDistinct,
    };
    let (codebook, trace) = learners::quantize_with_init(&ds.graphs, &held, a.k, &cfg, distortion, init)?;
    write_trace(&a.sgg.trace, &trace.to_csv())?;
    if let Some(out) = &a.out {
        io::write_codebook(out, &codebook)?;
    }
    let assignments = learners::assign(&ds.graphs, &codebook, &cfg.solver)?;
    let half_sq = learners::mean_distortion(&ds.graphs, &codebook, &cfg.solver, Distortion::Sq)?;
    let mut report = json!({
        "half_sq_distortion": half_sq,
        "sq_distortion": 2.0 * half_sq,
        "dist_distortion": learners::mean_distortion(&ds.graphs, &codebook, &cfg.solver, Distortion::Dist)?,
        "assignments": assignments,
    });
    if let Some(labels) = &ds.labels {
        let classes: Option<Vec<usize>> = labels
            .iter()
            .map(|&y| (y >= 0.0 && y.fract() == 0.0).then_some(y as usize))
            .collect();
        if let Some(classes) = classes {
            report["purity"] = json!(learners::purity(&assignments, &classes));
        }
    }
    Ok(report)
}

fn adaline_train(a: TrainArgs) -> Result<serde_json::Value> {
    let cfg = a.sgg.config()?;
    let ds = dataset(&a.data)?;
    let labeled = ds.labeled()?;
    let held = match a.sgg.held_out(&ds)? {
        Some(h) => h.labeled()?,
        None => Vec::new(),
    };
    let (model, trace) = learners::adaline_train(&labeled, &held, &cfg)?;
    write_trace(&a.sgg.trace, &trace.to_csv())?;
    if let Some(out) = &a.out {
        io::write_adaline(out, &model)?;
    }
    Ok(json!({
        "accuracy": learners::accuracy(&model, &labeled, &cfg.solver)?,
        "margins": to_value(&datagen::margin_report(&model, &labeled, &cfg.solver)?)?,
        "bias": model.bias,
    }))
}

fn adaline_predict(a: PredictArgs) -> Result<serde_json::Value> {
    let cfg = a.solver.config()?;
    let model = io::read_adaline(&a.model)?;
    let ds = dataset(&a.data)?;
    let graphs = ds
        .graphs
        .iter()
        .map(|g| g.pad_to_order(model.weight.order()))
        .collect::<Result<Vec<_>>>()?;
    let predictions = graphs
        .iter()
        .map(|g| learners::adaline_predict(&model, g, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut report = json!({"predictions": predictions});
    if let Some(labels) = &ds.labels {
        let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
        report["accuracy"] = json!(hits as f64 / labels.len() as f64);
    }
    Ok(report)
}

fn gradcheck(a: GradcheckArgs) -> Result<serde_json::Value> {
    let cfg = a.solver.config()?;
    let losses = if a.losses.is_empty() {
        LossKind::ALL.to_vec()
    } else {
        a.losses.iter().map(|s| s.parse()).collect::<Result<Vec<LossKind>>>()?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.solver.seed);
    let mut reports = Vec::new();
    for loss in losses {
        for _ in 0..a.points {
            let lp = LossPoint::random(loss, a.order, a.dim, a.k, &mut rng);
            let r = gendiff::finite_diff_check(&lp, &cfg, a.h, a.tol)?;
            reports.push(json!({
                "loss": r.loss.name(),
                "loss_value": r.loss_value,
                "deviation": r.deviation.is_finite().then_some(r.deviation),
                "verdict": r.verdict,
            }));
        }
    }
    Ok(serde_json::Value::Array(reports))
}

fn experiment(a: ExperimentArgs) -> Result<serde_json::Value> {
    let (mut cfg, recorded) = match (&a.manifest, &a.kind, &a.config) {
        (Some(path), _, _) => {
            let m = Manifest::read(path)?;
            if let Some(kind) = &a.kind {
                if kind.parse::<ExperimentKind>()? != m.config.kind {
                    return Err(Error::config("kind", "does not match the manifest"));
                }
            }
            (m.config.clone(), Some(m))
        }
        (None, kind, Some(path)) => {
            let kind = kind.as_deref().map(str::parse::<ExperimentKind>).transpose()?;
            let text = io::read_text(path)?;
            (ExperimentConfig::from_partial_json(&text, kind, &path.display().to_string())?, None)
        }
        (None, Some(kind), None) => (ExperimentConfig::default_for(kind.parse()?), None),
        (None, None, _) => return Err(Error::config("kind", "missing experiment kind")),
    };
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    let manifest = experiments::run(&cfg)?;
    let mut report = json!({
        "kind": cfg.kind.name(),
        "output_dir": cfg.output_dir,
        "manifest": cfg.output_dir.join(MANIFEST_FILE),
        "artifacts": manifest.artifacts,
    });
    if let Some(recorded) = recorded {
        let mismatched = experiments::mismatched_artifacts(&recorded, &manifest);
        if !mismatched.is_empty() {
            return Err(Error::config(
                "manifest",
                format!("replay differs from the recorded artifacts: {}", mismatched.join(", ")),
            ));
        }
        report["reproduced"] = json!(true);
    }
    Ok(report)
}
