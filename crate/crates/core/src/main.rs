//! Command-line front end for the experiment drivers.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, bad
//! config file, inconsistent parameters), 3 for numerical failures
//! (diverged chains, degenerate states), 1 for I/O errors.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mirrorlang::error::Error;
use mirrorlang::experiments::{
    resolve_config, run_experiment, write_artifacts, ConfigFile, Experiment,
};

#[derive(Parser)]
#[command(
    name = "mirrorlang",
    version,
    about = "Sampling on probability simplices by running Langevin dynamics in a mirror-dual space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chain ensemble on a Dirichlet posterior; writes the total-variation
    /// curve of the first-coordinate marginal against an exact sampler.
    SyntheticDirichlet(CommonArgs),
    /// The same ensemble across a step-size grid; writes a ranking by final
    /// accuracy plus the best curves.
    GridSearch(CommonArgs),
    /// Moments of the reflected square-root diffusion against its stationary
    /// law.
    CirDemo(CommonArgs),
    /// Curvature tables for half-line dual potentials, including the
    /// bracketed curvature sign change.
    BurgDemo(CommonArgs),
    /// Dual dynamics on a product of simplices; the curve reports the worst
    /// per-block total variation.
    ProductSimplex(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; explicit flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every chain derives its own stream from it.
    #[arg(long, allow_negative_numbers = true)]
    seed: Option<i64>,
    /// Number of independent chains (or reference draws).
    #[arg(long, allow_negative_numbers = true)]
    trials: Option<i64>,
    /// Iterations per chain.
    #[arg(long, allow_negative_numbers = true)]
    iters: Option<i64>,
    /// Mini-batch size; required for (and exclusive to) the smld sampler.
    #[arg(long, allow_negative_numbers = true)]
    batch_size: Option<i64>,
    /// Trajectory steps for the square-root diffusion demo.
    #[arg(long, allow_negative_numbers = true)]
    steps: Option<i64>,
    /// Single step size.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Comma-separated step sizes for grid-search or cir-demo sweeps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    beta_grid: Option<Vec<f64>>,
    /// Histogram bins over [0, 1].
    #[arg(long, allow_negative_numbers = true)]
    bins: Option<i64>,
    /// Sampler: mld, smld, or sgrld.
    #[arg(long)]
    sampler: Option<String>,
    /// Primal-map mode: exact or linearized.
    #[arg(long)]
    exp_mode: Option<String>,
    /// Output directory for CSV artifacts and metadata.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::SyntheticDirichlet(a) => (Experiment::SyntheticDirichlet, a),
        Command::GridSearch(a) => (Experiment::GridSearch, a),
        Command::CirDemo(a) => (Experiment::CirDemo, a),
        Command::BurgDemo(a) => (Experiment::BurgDemo, a),
        Command::ProductSimplex(a) => (Experiment::ProductSimplex, a),
    };
    match execute(experiment, args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Dimension { .. } => 2,
        Error::Divergence { .. } | Error::AllDiverged { .. } | Error::Domain(_) => 3,
        Error::Io(_) => 1,
    }
}

fn execute(experiment: Experiment, args: CommonArgs) -> Result<(), Error> {
    let file_cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ConfigFile::from_json(&text)?
        }
        None => ConfigFile::default(),
    };
    let overrides = ConfigFile {
        seed: args.seed,
        trials: args.trials,
        iters: args.iters,
        batch_size: args.batch_size,
        steps: args.steps,
        beta: args.beta,
        beta_grid: args.beta_grid,
        bins: args.bins,
        sampler: args.sampler,
        exp_mode: args.exp_mode,
        output_dir: args.out.map(|p| p.to_string_lossy().into_owned()),
        ..ConfigFile::default()
    };
    let cfg = resolve_config(experiment, &file_cfg.overlaid(overrides))?;

    let start = Instant::now();
    let mut arts = run_experiment(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    if let serde_json::Value::Object(map) = &mut arts.metadata {
        map.insert("wall_time_seconds".into(), serde_json::json!(wall));
    }
    let written = write_artifacts(&arts, &cfg.output_dir)?;

    println!("experiment: {}", cfg.experiment.name());
    if let Some(results) = arts.metadata.get("results") {
        let compact = serde_json::to_string(results).map_err(|e| Error::Config(e.to_string()))?;
        println!("results: {compact}");
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
