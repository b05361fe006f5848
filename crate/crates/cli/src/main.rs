use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod options;

use config::UsageError;
use options::{ActivationArg, ModeArg, PoolingArg, SplitArg, SuiteArg, TaskArg, TransportArg};

/// Hyperbolic kernel point convolution toolkit.
#[derive(Parser, Debug)]
#[command(name = "hkconv", version, about)]
struct Cli {
    /// Config file of `key=value` lines; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $HKCONV_OUT or the current directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Place K kernel points by minimizing the spread objective.
    KernelGen(KernelGenArgs),
    /// Run randomized property suites.
    Invariants(InvariantArgs),
    /// Gradient decay of the repulsion term against distance from the origin.
    AppendixA(AppendixArgs),
    /// Train a network and write metrics and a checkpoint.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint.
    Eval(EvalArgs),
    /// Train across kernel counts and seeds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct KernelGenArgs {
    /// Number of kernel points.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Spatial dimension of the hyperboloid.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub curvature: Option<f64>,
    /// Also write Poincaré-disk points and geodesics (2-D only).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug)]
pub struct InvariantArgs {
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest distance from the origin of sampled points.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Parallel transport used by the primitives under test.
    #[arg(long, value_enum)]
    pub transport: Option<TransportArg>,
}

#[derive(Args, Debug)]
pub struct AppendixArgs {
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Radii as start:stop:step.
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub curvature: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// `synth` or a dataset JSON file.
    #[arg(long)]
    pub data: Option<String>,
    /// Graphs in the synthetic suite.
    #[arg(long)]
    pub graphs: Option<usize>,
    /// Nodes per synthetic graph.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Seed of the synthetic suite.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub curvature: Option<f64>,
    /// `optimized`, `random`, or a kernel JSON file.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long, value_enum)]
    pub pooling: Option<PoolingArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint file [default: <out>/checkpoint.json].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Dataset options; unset options are read from the run manifest next to
    /// the checkpoint when present.
    #[command(flatten)]
    pub data: EvalDataArgs,
}

#[derive(Args, Debug)]
pub struct EvalDataArgs {
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub graphs: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated kernel counts.
    #[arg(long = "K-list")]
    pub k_list: Option<String>,
    /// Seeds per kernel count.
    #[arg(long)]
    pub seeds: Option<usize>,
}

/// Settings shared by every subcommand.
pub struct Global {
    pub file: config::ConfigFile,
    pub out: PathBuf,
    pub seed: u64,
}

fn global(cli: &Cli) -> anyhow::Result<Global> {
    let file = match &cli.config {
        Some(path) => config::ConfigFile::load(path)?,
        None => config::ConfigFile::default(),
    };
    let env_out = std::env::var_os("HKCONV_OUT").map(PathBuf::from);
    let out = match cli.out.clone() {
        Some(p) => p,
        None => match file.get::<PathBuf>("out")? {
            Some(p) => p,
            None => env_out.unwrap_or_else(|| PathBuf::from(".")),
        },
    };
    let seed = config::resolve(cli.seed, &file, "seed", 0)?;
    Ok(Global { file, out, seed })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let g = global(&cli)?;
    match cli.command {
        Command::KernelGen(a) => commands::kernel_gen(&g, &a),
        Command::Invariants(a) => commands::invariants(&g, &a),
        Command::AppendixA(a) => commands::appendix_a(&g, &a),
        Command::Train(a) => commands::train(&g, &a),
        Command::Eval(a) => commands::eval(&g, &a),
        Command::Sweep(a) => commands::sweep(&g, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
