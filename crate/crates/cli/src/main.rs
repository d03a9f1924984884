//! `mcsttm` command-line tool: ingest, train, eval, predict, gradcheck.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcsttm::Error;

use config::RunConfig;

const EXIT_GRADCHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_CHECKPOINT: u8 = 4;

#[derive(Parser)]
#[command(name = "mcsttm", version, about = "Multi-channel spatial-temporal traffic forecasting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.lr=0.001`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set train.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Remove a component: no_adaptive, no_fixed_graph, no_s_block,
    /// no_t_block or no_multi_channel; repeatable.
    #[arg(long, value_name = "NAME", global = true)]
    ablate: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate series and edge CSVs and write a dataset bundle.
    Ingest {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on an ingested bundle; writes a checkpoint and history.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test (or validation) split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also evaluate with Gaussian noise of this std on normalized inputs.
        #[arg(long)]
        noise_std: Option<f64>,
        /// Write the learned adaptive adjacency to this CSV.
        #[arg(long, value_name = "PATH")]
        export_adjacency: Option<PathBuf>,
    },
    /// Forecast the slices following the end of a bundle's series.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every differentiable operation.
    Gradcheck {
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

fn resolve(common: &Common, noise_std: Option<f64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    for pair in &common.overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("train.seed", &seed.to_string())?;
    }
    for name in &common.ablate {
        cfg.set(&format!("ablation.{name}"), "true")
            .map_err(|_| Error::Config(format!("unknown ablation '{name}'")))?;
    }
    if let Some(x) = noise_std {
        cfg.set("eval.noise_std", &x.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Error> {
    let noise = match &cli.command {
        Command::Eval { noise_std, .. } => *noise_std,
        _ => None,
    };
    let cfg = resolve(&cli.common, noise)?;
    log::debug!("resolved config {}:\n{}", cfg.hash(), cfg.canonical());
    match cli.command {
        Command::Ingest { series, edges, out } => {
            let s = commands::ingest(&cfg, &series, &edges, &out)?;
            println!("{} nodes, {} slices, {} edges", s.nodes, s.slices, s.edges);
        }
        Command::Train { data, out } => {
            let a = commands::train_cmd(&cfg, &data, &out)?;
            println!(
                "best validation MAE {:.4}; checkpoint {}; history {}",
                a.best_val_mae,
                a.checkpoint.display(),
                a.history.display()
            );
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            export_adjacency,
            ..
        } => {
            let report = commands::eval_cmd(&cfg, &checkpoint, &data, &out, export_adjacency.as_deref())?;
            print!("{}", std::fs::read_to_string(&report).unwrap_or_default());
        }
        Command::Predict { checkpoint, data, out } => {
            let path = commands::predict_cmd(&cfg, &checkpoint, &data, &out)?;
            println!("wrote {}", path.display());
        }
        Command::Gradcheck { corrupt_backward } => {
            if !commands::gradcheck_cmd(&cfg, corrupt_backward)? {
                return Ok(EXIT_GRADCHECK);
            }
        }
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGED,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
