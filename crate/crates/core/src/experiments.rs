//! Experiment drivers behind the `mirrorlang` binary.
//!
//! Each experiment resolves a JSON config plus command-line overrides into a
//! [`ResolvedConfig`], runs deterministically under a master seed, and
//! produces a set of in-memory artifacts (CSV files plus a `metadata.json`
//! document) that the binary writes to the output directory. Reruns with the
//! same resolved config produce byte-identical CSVs, including under
//! parallel execution: every chain draws from its own counter-based
//! substream, so scheduling cannot leak into the output.
//!
//! Experiments:
//!
//! * `synthetic-dirichlet`: an ensemble of chains targeting a Dirichlet
//!   posterior; writes the total-variation curve of the first-coordinate
//!   marginal against an exact-sampler reference (`curve.csv`).
//! * `grid-search`: the same ensemble across a step-size grid; writes
//!   `ranking.csv` and the best curves.
//! * `cir-demo`: moments of the reflected square-root diffusion against its
//!   closed-form stationary law (`moments.csv`).
//! * `burg-demo`: curvature tables of half-line dual potentials and the
//!   bracketed curvature sign change (`curvature_*.csv`).
//! * `product-simplex`: the dual dynamics on a product of simplices; the
//!   curve reports the worst per-block total variation.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::diagnostics::{grid_search, histogram_build, rate_slope, tv_distance, FitWindow, Histogram};
use crate::error::{Error, Result};
use crate::mirror::{burg_calculus_for, entropic_grad_h, softmax_with_mode, BurgTarget, ExpMode};
use crate::samplers::{
    run_dual_chain, run_sgrld_chain, sample_dirichlet_exact, ChainRunSpec, CirParams, GradSource,
    NoiseStream, StepSchedule, StreamPurpose,
};
use crate::targets::{DirichletModel, ObservationList, ProductSimplexTarget};

use rayon::prelude::*;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SyntheticDirichlet,
    GridSearch,
    CirDemo,
    BurgDemo,
    ProductSimplex,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SyntheticDirichlet => "synthetic-dirichlet",
            Experiment::GridSearch => "grid-search",
            Experiment::CirDemo => "cir-demo",
            Experiment::BurgDemo => "burg-demo",
            Experiment::ProductSimplex => "product-simplex",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "synthetic-dirichlet" => Ok(Experiment::SyntheticDirichlet),
            "grid-search" => Ok(Experiment::GridSearch),
            "cir-demo" => Ok(Experiment::CirDemo),
            "burg-demo" => Ok(Experiment::BurgDemo),
            "product-simplex" => Ok(Experiment::ProductSimplex),
            other => Err(Error::invalid(
                "experiment",
                format!("unknown experiment {other:?}; expected synthetic-dirichlet, grid-search, cir-demo, burg-demo, or product-simplex"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Exact-gradient dual dynamics.
    Mld,
    /// Mini-batch dual dynamics.
    Smld,
    /// Positive-orthant baseline.
    Sgrld,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Mld => "mld",
            SamplerKind::Smld => "smld",
            SamplerKind::Sgrld => "sgrld",
        }
    }

    fn parse(name: &str) -> Result<Self> {
        match name {
            "mld" => Ok(SamplerKind::Mld),
            "smld" => Ok(SamplerKind::Smld),
            "sgrld" => Ok(SamplerKind::Sgrld),
            other => Err(Error::invalid(
                "sampler",
                format!("unknown sampler {other:?}; expected mld, smld, or sgrld"),
            )),
        }
    }
}

/// Chain initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Dual origin (`y = 0`; the baseline starts at its posterior shapes).
    Zero,
    /// Start each chain at an exact posterior draw.
    Oracle,
}

impl InitKind {
    fn parse(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(InitKind::Zero),
            "oracle" => Ok(InitKind::Oracle),
            other => Err(Error::invalid("init", format!("unknown init {other:?}; expected zero or oracle"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            InitKind::Zero => "zero",
            InitKind::Oracle => "oracle",
        }
    }
}

/// On-disk config file schema. All fields optional; command-line flags win
/// over file values. Unknown keys are rejected.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub model: Option<ModelConfig>,
    pub sampler: Option<String>,
    pub trials: Option<i64>,
    pub iters: Option<i64>,
    pub batch_size: Option<i64>,
    pub steps: Option<i64>,
    pub seed: Option<i64>,
    pub bins: Option<i64>,
    pub exp_mode: Option<String>,
    pub beta: Option<f64>,
    pub beta_grid: Option<Vec<f64>>,
    pub keep: Option<i64>,
    pub checkpoints: Option<i64>,
    pub init: Option<String>,
    pub blocks: Option<Vec<ModelConfig>>,
    pub cir: Option<CirConfig>,
    pub burg_c: Option<f64>,
    pub output_dir: Option<String>,
    pub trace: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub counts: Vec<f64>,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies non-empty override fields on top of `self` (overrides win).
    pub fn overlaid(mut self, over: ConfigFile) -> ConfigFile {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            experiment, model, sampler, trials, iters, batch_size, steps, seed, bins, exp_mode,
            beta, beta_grid, keep, checkpoints, init, blocks, cir, burg_c, output_dir, trace
        );
        self
    }
}

/// Fully validated experiment parameters.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub model: DirichletModel,
    pub sampler: SamplerKind,
    pub trials: usize,
    pub iters: u64,
    pub batch_size: Option<usize>,
    pub steps: u64,
    pub seed: u64,
    pub bins: usize,
    pub exp_mode: ExpMode,
    /// Step sizes: a singleton except for grid-search and cir-demo sweeps.
    pub betas: Vec<f64>,
    pub keep: usize,
    pub checkpoints: usize,
    pub init: InitKind,
    pub blocks: Vec<DirichletModel>,
    pub cir: CirParams,
    pub burg_c: f64,
    pub output_dir: PathBuf,
    pub trace: bool,
}

/// Default step-size grid for the dual-dynamics samplers. Every entry fully
/// converges on the benchmark model within the default horizon; the ranking
/// tie-break then selects the smallest, whose convergence transition sits
/// late enough in the window for a well-conditioned rate fit.
pub const DEFAULT_MLD_GRID: [f64; 4] = [1.5e-5, 6e-5, 2.5e-4, 1e-3];
/// Default grid for the positive-orthant baseline, which needs larger steps
/// to move weights of the order of the total counts.
pub const DEFAULT_SGRLD_GRID: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
/// Default single step sizes for one-shot runs.
pub const DEFAULT_MLD_BETA: f64 = 1.5e-5;
pub const DEFAULT_SGRLD_BETA: f64 = 1e-3;
/// Default step size for the product-of-simplices run.
pub const DEFAULT_PRODUCT_BETA: f64 = 5e-3;
/// Default step size for the square-root diffusion demo.
pub const DEFAULT_CIR_BETA: f64 = 1e-3;

fn positive_usize(field: &str, v: Option<i64>, default: usize) -> Result<usize> {
    match v {
        None => Ok(default),
        Some(x) if x > 0 => Ok(x as usize),
        Some(x) => Err(Error::invalid(field, format!("must be positive, got {x}"))),
    }
}

fn positive_u64(field: &str, v: Option<i64>, default: u64) -> Result<u64> {
    match v {
        None => Ok(default),
        Some(x) if x > 0 => Ok(x as u64),
        Some(x) => Err(Error::invalid(field, format!("must be positive, got {x}"))),
    }
}

fn positive_beta(field: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
    }
    Ok(v)
}

/// Validates a merged config for the given experiment and fills defaults.
pub fn resolve_config(experiment: Experiment, file: &ConfigFile) -> Result<ResolvedConfig> {
    if let Some(name) = &file.experiment {
        let from_file = Experiment::parse(name)?;
        if from_file != experiment {
            return Err(Error::invalid(
                "experiment",
                format!("config file says {:?} but the command line selected {:?}", name, experiment.name()),
            ));
        }
    }

    let sampler = match &file.sampler {
        None => SamplerKind::Mld,
        Some(s) => SamplerKind::parse(s)?,
    };
    let model = match &file.model {
        None => DirichletModel::sparse_benchmark(),
        Some(m) => DirichletModel::new(m.counts.clone(), m.params.clone())?,
    };

    let trials = positive_usize("trials", file.trials, 100_000)?;
    let iters = positive_u64("iters", file.iters, 1_000)?;
    let steps = positive_u64("steps", file.steps, 1_000_000)?;
    let bins = positive_usize("bins", file.bins, 50)?;
    // Dense enough that convergence transitions span many checkpoints, so
    // rate fits do not depend on grid alignment.
    let checkpoints = positive_usize("checkpoints", file.checkpoints, 250)?;
    let seed = match file.seed {
        None => 0,
        Some(s) if s >= 0 => s as u64,
        Some(s) => return Err(Error::invalid("seed", format!("must be non-negative, got {s}"))),
    };

    let batch_size = match (sampler, file.batch_size) {
        (SamplerKind::Smld, None) => {
            return Err(Error::invalid("batch_size", "required when sampler is smld"));
        }
        (SamplerKind::Smld, Some(b)) if b > 0 => Some(b as usize),
        (SamplerKind::Smld, Some(b)) => {
            return Err(Error::invalid("batch_size", format!("must be positive, got {b}")));
        }
        (_, None) => None,
        (_, Some(_)) => {
            return Err(Error::invalid("batch_size", "only valid when sampler is smld"));
        }
    };

    let exp_mode = match file.exp_mode.as_deref() {
        None | Some("exact") => ExpMode::Exact,
        Some("linearized") => ExpMode::Linearized,
        Some(other) => {
            return Err(Error::invalid(
                "exp_mode",
                format!("unknown mode {other:?}; expected exact or linearized"),
            ));
        }
    };
    let init = match &file.init {
        None => InitKind::Zero,
        Some(s) => InitKind::parse(s)?,
    };

    let default_single = match sampler {
        SamplerKind::Sgrld => DEFAULT_SGRLD_BETA,
        _ => DEFAULT_MLD_BETA,
    };
    let betas: Vec<f64> = match experiment {
        Experiment::GridSearch => {
            if file.beta.is_some() {
                return Err(Error::invalid("beta", "grid-search takes beta_grid, not beta"));
            }
            match &file.beta_grid {
                None => match sampler {
                    SamplerKind::Sgrld => DEFAULT_SGRLD_GRID.to_vec(),
                    _ => DEFAULT_MLD_GRID.to_vec(),
                },
                Some(g) if g.is_empty() => {
                    return Err(Error::invalid("beta_grid", "grid must be non-empty"));
                }
                Some(g) => g.clone(),
            }
        }
        Experiment::CirDemo => match (&file.beta_grid, file.beta) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("beta", "give either beta or beta_grid, not both"));
            }
            (Some(g), None) if !g.is_empty() => g.clone(),
            (Some(_), None) => return Err(Error::invalid("beta_grid", "grid must be non-empty")),
            (None, Some(b)) => vec![b],
            (None, None) => vec![DEFAULT_CIR_BETA],
        },
        Experiment::BurgDemo => {
            if file.beta.is_some() || file.beta_grid.is_some() {
                return Err(Error::invalid("beta", "burg-demo is deterministic and takes no step size"));
            }
            Vec::new()
        }
        Experiment::SyntheticDirichlet | Experiment::ProductSimplex => {
            if file.beta_grid.is_some() {
                return Err(Error::invalid("beta_grid", "only grid-search and cir-demo take a grid; use beta"));
            }
            let default = if experiment == Experiment::ProductSimplex {
                DEFAULT_PRODUCT_BETA
            } else {
                default_single
            };
            vec![file.beta.unwrap_or(default)]
        }
    };
    for &b in &betas {
        positive_beta(if experiment == Experiment::GridSearch { "beta_grid" } else { "beta" }, b)?;
    }

    let keep = positive_usize(
        "keep",
        file.keep,
        match sampler {
            SamplerKind::Sgrld => 5,
            _ => 3,
        },
    )?;

    let blocks = match (&file.blocks, experiment) {
        (Some(bs), Experiment::ProductSimplex) => {
            if bs.is_empty() {
                return Err(Error::invalid("blocks", "need at least one block"));
            }
            bs.iter()
                .map(|m| DirichletModel::new(m.counts.clone(), m.params.clone()))
                .collect::<Result<Vec<_>>>()?
        }
        (Some(_), _) => {
            return Err(Error::invalid("blocks", "only valid for product-simplex"));
        }
        (None, _) => vec![
            DirichletModel::new(vec![2.0, 1.0, 0.0], vec![1.0, 1.0, 1.0])?,
            DirichletModel::new(vec![1.0, 0.0, 2.0], vec![1.0, 1.0, 1.0])?,
        ],
    };
    if experiment == Experiment::ProductSimplex && sampler != SamplerKind::Mld {
        return Err(Error::invalid("sampler", "product-simplex supports only mld"));
    }

    let cir = match file.cir {
        None => CirParams::new(2.0, 1.0, 1.0)?,
        Some(c) => CirParams::new(c.a, c.b, c.c)?,
    };
    let burg_c = match file.burg_c {
        None => 1.0 / 3.0,
        Some(c) if c.is_finite() && c > 0.0 => c,
        Some(c) => return Err(Error::invalid("burg_c", format!("must be finite and > 0, got {c}"))),
    };

    let trace = file.trace.unwrap_or(false);
    if trace && trials > 100 {
        return Err(Error::invalid("trace", format!("tracing is limited to 100 trials, got {trials}")));
    }
    if trace && !matches!(experiment, Experiment::SyntheticDirichlet) {
        return Err(Error::invalid("trace", "tracing is only available for synthetic-dirichlet"));
    }

    let output_dir = PathBuf::from(file.output_dir.clone().unwrap_or_else(|| "out".to_string()));

    Ok(ResolvedConfig {
        experiment,
        model,
        sampler,
        trials,
        iters,
        batch_size,
        steps,
        seed,
        bins,
        exp_mode,
        betas,
        keep,
        checkpoints,
        init,
        blocks,
        cir,
        burg_c,
        output_dir,
        trace,
    })
}

// ---------------------------------------------------------------------------
// artifacts
// ---------------------------------------------------------------------------

/// One output file, rendered in memory so determinism can be checked without
/// touching the filesystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub files: Vec<Artifact>,
    pub metadata: serde_json::Value,
}

/// Writes every artifact plus `metadata.json` under `dir`, creating it if
/// needed. Returns the written paths.
pub fn write_artifacts(arts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in &arts.files {
        let path = dir.join(&f.name);
        std::fs::write(&path, f.contents.as_bytes())?;
        written.push(path);
    }
    let meta_path = dir.join("metadata.json");
    let mut text = serde_json::to_string_pretty(&arts.metadata).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&meta_path, text)?;
    written.push(meta_path);
    Ok(written)
}

fn csv_from_rows(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Geometrically spaced checkpoint iterations in `[1, iters]`, deduplicated,
/// always ending exactly at `iters`. A count covering the whole horizon
/// checkpoints every iteration.
pub fn checkpoint_schedule(iters: u64, count: usize) -> Vec<u64> {
    let count = count.max(1);
    if count as u64 >= iters {
        return (1..=iters).collect();
    }
    if count == 1 {
        return vec![iters];
    }
    let hi = iters as f64;
    let mut out: Vec<u64> = (0..count)
        .map(|k| hi.powf(k as f64 / (count - 1) as f64).ceil() as u64)
        .map(|t| t.clamp(1, iters))
        .collect();
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// ensemble runs
// ---------------------------------------------------------------------------

/// First-coordinate samples of an exact-posterior reference set.
fn oracle_first_coords(
    model: &DirichletModel,
    trials: usize,
    seed: u64,
    purpose: StreamPurpose,
) -> Result<Vec<f64>> {
    let mut noise = NoiseStream::for_purpose(seed, purpose);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        out.push(sample_dirichlet_exact(model, &mut noise)?.coords()[0]);
    }
    Ok(out)
}

/// Per-chain first-coordinate samples at every checkpoint, fed straight
/// into per-checkpoint histograms. Chains fold into worker-local histogram
/// stacks merged by exact integer addition, so the result is independent of
/// the parallel partition.
fn ensemble_checkpoint_histograms(
    cfg: &ResolvedConfig,
    beta: f64,
    checkpoints: &[u64],
) -> Result<Vec<Histogram>> {
    let model = &cfg.model;
    let obs = match cfg.sampler {
        SamplerKind::Smld => {
            let obs = ObservationList::from_model(model)?;
            if let Some(b) = cfg.batch_size {
                if b > obs.len() {
                    return Err(Error::invalid(
                        "batch_size",
                        format!("batch size {b} exceeds the {} observations", obs.len()),
                    ));
                }
            }
            Some(obs)
        }
        _ => None,
    };
    let empty: Vec<Histogram> = vec![Histogram::new(cfg.bins)?; checkpoints.len()];

    (0..cfg.trials)
        .into_par_iter()
        .map(|chain| -> Result<Vec<f64>> {
            let mut noise = NoiseStream::for_chain(cfg.seed, chain as u64);
            let mut values = vec![f64::NAN; checkpoints.len()];
            match cfg.sampler {
                SamplerKind::Mld | SamplerKind::Smld => {
                    let grad = match (&obs, cfg.batch_size) {
                        (Some(o), Some(b)) => GradSource::Batch { obs: o, batch_size: b },
                        _ => GradSource::Full,
                    };
                    let spec = ChainRunSpec {
                        model,
                        schedule: StepSchedule::Constant(beta),
                        iters: cfg.iters,
                        grad,
                        exp_mode: cfg.exp_mode,
                    };
                    let y0 = match cfg.init {
                        InitKind::Zero => vec![0.0; model.dim()],
                        InitKind::Oracle => {
                            let x = sample_dirichlet_exact(model, &mut noise)?;
                            entropic_grad_h(&x)?.into_vec()
                        }
                    };
                    run_dual_chain(&spec, &y0, &mut noise, checkpoints, |k, y| {
                        values[k] = first_coord_of_mode(y, cfg.exp_mode);
                    })?;
                }
                SamplerKind::Sgrld => {
                    let theta0 = match cfg.init {
                        InitKind::Zero => model.posterior_shape(),
                        InitKind::Oracle => {
                            let mut t = Vec::with_capacity(model.num_categories());
                            for &s in &model.posterior_shape() {
                                t.push(noise.gamma(s)?);
                            }
                            t
                        }
                    };
                    run_sgrld_chain(
                        model,
                        &theta0,
                        StepSchedule::Constant(beta),
                        cfg.iters,
                        &mut noise,
                        checkpoints,
                        |k, theta| {
                            let sum: f64 = theta.iter().sum();
                            values[k] = theta[0] / sum;
                        },
                    )?;
                }
            }
            Ok(values)
        })
        .try_fold(
            || empty.clone(),
            |mut acc, values| -> Result<Vec<Histogram>> {
                for (h, v) in acc.iter_mut().zip(values?) {
                    h.record(v)?;
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                for (ha, hb) in a.iter_mut().zip(&b) {
                    ha.merge(hb)?;
                }
                Ok(a)
            },
        )
}

fn first_coord_of_mode(y: &[f64], mode: ExpMode) -> f64 {
    match softmax_with_mode(y, mode) {
        Ok(p) => p.coords()[0],
        Err(_) => f64::NAN,
    }
}

/// The tv-vs-iteration curve of per-checkpoint ensemble histograms against
/// a reference histogram.
fn tv_curve(
    histograms: &[Histogram],
    checkpoints: &[u64],
    reference: &Histogram,
) -> Result<Vec<(u64, f64)>> {
    checkpoints
        .iter()
        .zip(histograms)
        .map(|(&t, h)| Ok((t, tv_distance(h, reference)?)))
        .collect()
}

fn slope_json(curve: &[(u64, f64)]) -> serde_json::Value {
    match rate_slope(curve, FitWindow::Auto) {
        Ok(fit) => serde_json::json!({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "window": [fit.window.0, fit.window.1],
        }),
        Err(_) => serde_json::Value::Null,
    }
}

fn config_json(cfg: &ResolvedConfig) -> serde_json::Value {
    serde_json::json!({
        "experiment": cfg.experiment.name(),
        "sampler": cfg.sampler.name(),
        "trials": cfg.trials,
        "iters": cfg.iters,
        "batch_size": cfg.batch_size,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "bins": cfg.bins,
        "exp_mode": match cfg.exp_mode { ExpMode::Exact => "exact", ExpMode::Linearized => "linearized" },
        "betas": cfg.betas,
        "keep": cfg.keep,
        "checkpoints": cfg.checkpoints,
        "init": cfg.init.name(),
        "burg_c": cfg.burg_c,
        "cir": { "a": cfg.cir.a, "b": cfg.cir.b, "c": cfg.cir.c },
        "model": { "counts": cfg.model.counts(), "params": cfg.model.params() },
        "blocks": cfg.blocks.iter().map(|b| serde_json::json!({
            "counts": b.counts(), "params": b.params(),
        })).collect::<Vec<_>>(),
    })
}

// ---------------------------------------------------------------------------
// drivers
// ---------------------------------------------------------------------------

/// Dispatches to the experiment driver.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    match cfg.experiment {
        Experiment::SyntheticDirichlet => run_synthetic_dirichlet(cfg),
        Experiment::GridSearch => run_grid_search(cfg),
        Experiment::CirDemo => run_cir_demo(cfg),
        Experiment::BurgDemo => run_burg_demo(cfg),
        Experiment::ProductSimplex => run_product_simplex(cfg),
    }
}

pub fn run_synthetic_dirichlet(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    let beta = cfg.betas[0];
    let checkpoints = checkpoint_schedule(cfg.iters, cfg.checkpoints);

    let reference = histogram_build(
        &oracle_first_coords(&cfg.model, cfg.trials, cfg.seed, StreamPurpose::OracleReference)?,
        cfg.bins,
    )?;
    let null_set = histogram_build(
        &oracle_first_coords(&cfg.model, cfg.trials, cfg.seed, StreamPurpose::OracleNull)?,
        cfg.bins,
    )?;
    let null_tv = tv_distance(&reference, &null_set)?;

    let histograms = ensemble_checkpoint_histograms(cfg, beta, &checkpoints)?;
    let curve = tv_curve(&histograms, &checkpoints, &reference)?;

    let mut files = vec![Artifact {
        name: "curve.csv".into(),
        contents: csv_from_rows("iter,tv", curve.iter().map(|(t, tv)| format!("{t},{tv}"))),
    }];
    if cfg.trace {
        files.push(trace_artifact(cfg, beta, &checkpoints)?);
    }

    let final_tv = curve.last().map(|&(_, tv)| tv).unwrap_or(f64::NAN);
    let metadata = serde_json::json!({
        "config": config_json(cfg),
        "results": {
            "beta": beta,
            "final_tv": final_tv,
            "null_tv": null_tv,
            "rate_fit": slope_json(&curve),
        },
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunArtifacts { files, metadata })
}

/// Dual-state trace for small ensembles: one row per chain, checkpoint, and
/// coordinate.
fn trace_artifact(cfg: &ResolvedConfig, beta: f64, checkpoints: &[u64]) -> Result<Artifact> {
    let d = cfg.model.dim();
    let mut rows = Vec::new();
    for chain in 0..cfg.trials {
        let mut noise = NoiseStream::for_chain(cfg.seed, chain as u64);
        match cfg.sampler {
            SamplerKind::Sgrld => {
                let theta0 = cfg.model.posterior_shape();
                run_sgrld_chain(
                    &cfg.model,
                    &theta0,
                    StepSchedule::Constant(beta),
                    cfg.iters,
                    &mut noise,
                    checkpoints,
                    |k, theta| {
                        for (coord, v) in theta.iter().enumerate() {
                            rows.push(format!("{chain},{},{coord},{v}", checkpoints[k]));
                        }
                    },
                )?;
            }
            _ => {
                let grad = GradSource::Full;
                let spec = ChainRunSpec {
                    model: &cfg.model,
                    schedule: StepSchedule::Constant(beta),
                    iters: cfg.iters,
                    grad,
                    exp_mode: cfg.exp_mode,
                };
                run_dual_chain(&spec, &vec![0.0; d], &mut noise, checkpoints, |k, y| {
                    for (coord, v) in y.iter().enumerate() {
                        rows.push(format!("{chain},{},{coord},{v}", checkpoints[k]));
                    }
                })?;
            }
        }
    }
    Ok(Artifact { name: "trace.csv".into(), contents: csv_from_rows("chain,iter,coord,value", rows) })
}

pub fn run_grid_search(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    let checkpoints = checkpoint_schedule(cfg.iters, cfg.checkpoints);
    let reference = histogram_build(
        &oracle_first_coords(&cfg.model, cfg.trials, cfg.seed, StreamPurpose::OracleReference)?,
        cfg.bins,
    )?;
    let null_set = histogram_build(
        &oracle_first_coords(&cfg.model, cfg.trials, cfg.seed, StreamPurpose::OracleNull)?,
        cfg.bins,
    )?;
    let null_tv = tv_distance(&reference, &null_set)?;

    let runner = |beta: f64| -> Result<Vec<(u64, f64)>> {
        let histograms = ensemble_checkpoint_histograms(cfg, beta, &checkpoints)?;
        tv_curve(&histograms, &checkpoints, &reference)
    };
    let ranked = grid_search(&cfg.betas, cfg.keep, &runner)?;

    let mut files = vec![Artifact {
        name: "ranking.csv".into(),
        contents: csv_from_rows(
            "beta,final_tv,slope",
            ranked.iter().map(|e| {
                format!("{},{},{}", e.beta, e.final_tv, e.slope.unwrap_or(f64::NAN))
            }),
        ),
    }];
    for (rank, entry) in ranked.iter().take(cfg.keep).enumerate() {
        if entry.curve.is_empty() {
            continue;
        }
        files.push(Artifact {
            name: format!("curve_rank{}.csv", rank + 1),
            contents: csv_from_rows("iter,tv", entry.curve.iter().map(|(t, tv)| format!("{t},{tv}"))),
        });
    }

    let best = &ranked[0];
    let metadata = serde_json::json!({
        "config": config_json(cfg),
        "results": {
            "best_beta": best.beta,
            "best_final_tv": best.final_tv,
            "best_rate_fit": if best.curve.is_empty() { serde_json::Value::Null } else { slope_json(&best.curve) },
            "null_tv": null_tv,
            "ranking": ranked.iter().map(|e| serde_json::json!({
                "beta": e.beta,
                "final_tv": if e.final_tv.is_nan() { serde_json::Value::Null } else { e.final_tv.into() },
                "slope": e.slope,
                "score": if e.score.is_nan() { serde_json::Value::Null } else { e.score.into() },
                "diverged": e.diverged,
            })).collect::<Vec<_>>(),
        },
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunArtifacts { files, metadata })
}

pub fn run_cir_demo(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    let burn_in = cfg.steps / 100;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (i, &beta) in cfg.betas.iter().enumerate() {
        let mut noise = NoiseStream::for_chain(cfg.seed, i as u64);
        let (mean, var) = run_cir_trajectory(&cfg.cir, beta, cfg.steps, burn_in, &mut noise)?;
        rows.push(format!("{beta},{mean},{var}"));
        results.push(serde_json::json!({ "beta": beta, "mean": mean, "var": var }));
    }
    let files = vec![Artifact {
        name: "moments.csv".into(),
        contents: csv_from_rows("beta,mean,var", rows),
    }];
    let metadata = serde_json::json!({
        "config": config_json(cfg),
        "results": {
            "stationary_mean": cfg.cir.stationary_mean(),
            "stationary_var": cfg.cir.stationary_var(),
            "rows": results,
        },
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunArtifacts { files, metadata })
}

fn run_cir_trajectory(
    params: &CirParams,
    beta: f64,
    steps: u64,
    burn_in: u64,
    noise: &mut NoiseStream,
) -> Result<(f64, f64)> {
    crate::samplers::run_cir_moments(params, beta, steps, burn_in, noise)
}

pub fn run_burg_demo(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    // 100 evaluation points across the dual domain, away from the pole at 0.
    let grid: Vec<f64> = (0..100).map(|k| -10.0 + (10.0 - 0.05) * (k as f64 + 0.5) / 100.0).collect();
    let targets = [
        ("exponential", BurgTarget::Exponential),
        ("gaussian", BurgTarget::Gaussian { c: cfg.burg_c }),
    ];

    let mut files = Vec::new();
    let mut brackets = serde_json::Map::new();
    for (name, target) in targets {
        let h = 1e-5;
        let mut rows = Vec::with_capacity(grid.len());
        let mut signs = Vec::with_capacity(grid.len());
        for &y in &grid {
            let c = burg_calculus_for(target, y)?;
            let wp = burg_calculus_for(target, y + h)?.w;
            let wm = burg_calculus_for(target, y - h)?.w;
            let fd = (wp - 2.0 * c.w + wm) / (h * h);
            let sign = if c.w_second > 0.0 {
                1
            } else if c.w_second < 0.0 {
                -1
            } else {
                0
            };
            signs.push((y, c.w_second));
            rows.push(format!("{y},{},{fd},{sign}", c.w_second));
        }
        files.push(Artifact {
            name: format!("curvature_{name}.csv"),
            contents: csv_from_rows("y,w2_closed,w2_fd,sign", rows),
        });

        let root = bracket_sign_change(&signs, target);
        brackets.insert(
            format!("sign_change_{name}"),
            match root {
                Some(r) => serde_json::json!(r),
                None => serde_json::Value::Null,
            },
        );
    }
    brackets.insert(
        "sign_change_gaussian_closed_form".into(),
        serde_json::json!(-(3.0 * cfg.burg_c).sqrt()),
    );

    let metadata = serde_json::json!({
        "config": config_json(cfg),
        "results": serde_json::Value::Object(brackets),
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunArtifacts { files, metadata })
}

/// Bisects the first sign change of `w''` between adjacent grid points.
fn bracket_sign_change(signs: &[(f64, f64)], target: BurgTarget) -> Option<f64> {
    let flip = signs.windows(2).find(|w| w[0].1.signum() * w[1].1.signum() < 0.0)?;
    let (mut lo, mut hi) = (flip[0].0, flip[1].0);
    let f = |y: f64| burg_calculus_for(target, y).map(|c| c.w_second).unwrap_or(f64::NAN);
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if !fm.is_finite() {
            return None;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn run_product_simplex(cfg: &ResolvedConfig) -> Result<RunArtifacts> {
    let beta = cfg.betas[0];
    let target = ProductSimplexTarget::new(cfg.blocks.clone())?;
    let widths = target.widths().to_vec();
    let dim = target.dim();
    let checkpoints = checkpoint_schedule(cfg.iters, cfg.checkpoints);

    // Per-block reference histograms from one shared oracle stream.
    let mut oracle = NoiseStream::for_purpose(cfg.seed, StreamPurpose::OracleReference);
    let mut null_noise = NoiseStream::for_purpose(cfg.seed, StreamPurpose::OracleNull);
    let mut references = Vec::with_capacity(widths.len());
    let mut null_tv = 0.0_f64;
    for block in target.blocks() {
        let mut refs = Vec::with_capacity(cfg.trials);
        let mut nulls = Vec::with_capacity(cfg.trials);
        for _ in 0..cfg.trials {
            refs.push(sample_dirichlet_exact(block, &mut oracle)?.coords()[0]);
            nulls.push(sample_dirichlet_exact(block, &mut null_noise)?.coords()[0]);
        }
        let r = histogram_build(&refs, cfg.bins)?;
        let n = histogram_build(&nulls, cfg.bins)?;
        null_tv = null_tv.max(tv_distance(&r, &n)?);
        references.push(r);
    }

    // histograms[checkpoint][block], folded across chains as in the
    // single-simplex ensemble.
    let empty: Vec<Vec<Histogram>> =
        vec![vec![Histogram::new(cfg.bins)?; widths.len()]; checkpoints.len()];
    let histograms: Vec<Vec<Histogram>> = (0..cfg.trials)
        .into_par_iter()
        .map(|chain| -> Result<Vec<Vec<f64>>> {
            let mut noise = NoiseStream::for_chain(cfg.seed, chain as u64);
            let mut y = vec![0.0; dim];
            let mut xi = vec![0.0; dim];
            let mut out = vec![vec![f64::NAN; widths.len()]; checkpoints.len()];
            let mut next_cp = 0;
            let noise_scale = (2.0 * beta).sqrt();
            for t in 0..cfg.iters {
                let g = target.grad_w(&y)?;
                noise.fill_standard_normal(&mut xi);
                for l in 0..dim {
                    y[l] += -beta * g[l] + noise_scale * xi[l];
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { iteration: t + 1 });
                }
                if next_cp < checkpoints.len() && checkpoints[next_cp] == t + 1 {
                    let mut offset = 0;
                    for (bi, &w) in widths.iter().enumerate() {
                        let p = softmax_with_mode(&y[offset..offset + w], cfg.exp_mode)?;
                        out[next_cp][bi] = p.coords()[0];
                        offset += w;
                    }
                    next_cp += 1;
                }
            }
            Ok(out)
        })
        .try_fold(
            || empty.clone(),
            |mut acc, values| -> Result<Vec<Vec<Histogram>>> {
                for (row, vals) in acc.iter_mut().zip(values?) {
                    for (h, v) in row.iter_mut().zip(vals) {
                        h.record(v)?;
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(&b) {
                    for (ha, hb) in ra.iter_mut().zip(rb) {
                        ha.merge(hb)?;
                    }
                }
                Ok(a)
            },
        )?;

    // Worst per-block tv at each checkpoint.
    let mut curve = Vec::with_capacity(checkpoints.len());
    for (k, &t) in checkpoints.iter().enumerate() {
        let mut worst = 0.0_f64;
        for (bi, reference) in references.iter().enumerate() {
            worst = worst.max(tv_distance(&histograms[k][bi], reference)?);
        }
        curve.push((t, worst));
    }

    let files = vec![Artifact {
        name: "curve.csv".into(),
        contents: csv_from_rows("iter,tv", curve.iter().map(|(t, tv)| format!("{t},{tv}"))),
    }];
    let final_tv = curve.last().map(|&(_, tv)| tv).unwrap_or(f64::NAN);
    let metadata = serde_json::json!({
        "config": config_json(cfg),
        "results": {
            "beta": beta,
            "final_tv": final_tv,
            "null_tv": null_tv,
            "block_widths": widths,
            "rate_fit": slope_json(&curve),
        },
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    Ok(RunArtifacts { files, metadata })
}
