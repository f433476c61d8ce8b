use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lstc::checkpoint::Checkpoint;
use lstc::config::RunConfig;
use lstc::eval::{evaluate, export_trajectories};
use lstc::plot::plot_metrics;
use lstc::run::{epoch_budget, train_run};
use lstc::train::Ablation;

/// Safe RL for autonomous driving with long- and short-term constraints.
///
/// Log verbosity follows the LSTC_LOG environment variable
/// (error, warn, info, debug, trace; default info).
#[derive(Parser)]
#[command(name = "lstc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seed` (or `eval.seed` for eval and export-traj).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to resume from (train) or to load the policy from.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Constraint terms: lstc, ppo or ppo-lag.
    #[arg(long)]
    mode: Option<Ablation>,
}

#[derive(Subcommand)]
enum Command {
    /// Train until the configured step budget is spent.
    Train(Common),
    /// Evaluate a checkpoint's mean policy on the evaluation maps.
    Eval(Common),
    /// Write per-step trajectory CSVs of a checkpoint's policy.
    ExportTraj {
        #[command(flatten)]
        common: Common,
        /// Number of episodes (default: eval.export_episodes).
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Render the training curves of a metrics CSV as SVG.
    Plot {
        /// Metrics CSV written by `train`.
        metrics: PathBuf,
        /// Output directory (default: the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSTC_LOG", "info"))
        .format_timestamp_secs()
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => train(c),
        Command::Eval(c) => eval(c),
        Command::ExportTraj { common, episodes } => export(common, episodes),
        Command::Plot { metrics, out } => {
            let out = out.unwrap_or_else(|| metrics.parent().unwrap_or(Path::new(".")).to_path_buf());
            for p in plot_metrics(&metrics, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn train(c: Common) -> Result<()> {
    let (mut config, resume) = match &c.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if c.config.is_some() || c.seed.is_some() || c.mode.is_some() {
                log::warn!("resuming: --config, --seed and --mode are taken from the checkpoint");
            }
            (ck.config.clone(), Some(ck))
        }
        None => {
            let mut config = load_config(c.config.as_deref())?;
            if let Some(seed) = c.seed {
                config.run.seed = seed;
            }
            if let Some(mode) = c.mode {
                config.run.mode = mode;
            }
            (config, None)
        }
    };
    if let Some(out) = c.out {
        config.run.out_dir = out;
    }
    let out = config.run.out_dir.clone();
    log::info!(
        "training {} (seed {}) for {} epochs of {} steps into {}",
        config.run.mode.name(),
        config.run.seed,
        epoch_budget(&config),
        config.train.batch_size,
        out.display()
    );
    let reports = train_run(&config, &out, resume)?;
    if let Some(last) = reports.last() {
        println!(
            "epoch {} steps {} reward {:.3} cost {:.3} success {:.3} feasible {:.4}",
            last.epoch, last.steps, last.ep_reward, last.ep_cost, last.success_rate, last.feasible_rate
        );
    }
    Ok(())
}

/// The checkpoint plus the config governing evaluation (the checkpoint's
/// own unless `--config` is given).
fn policy_and_config(c: &Common) -> Result<(Checkpoint, RunConfig)> {
    let path = c
        .checkpoint
        .as_ref()
        .context("--checkpoint is required")?;
    let ck = Checkpoint::load(path)?;
    let mut config = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => ck.config.clone(),
    };
    if let Some(seed) = c.seed {
        config.eval.seed = seed;
    }
    Ok((ck, config))
}

fn eval(c: Common) -> Result<()> {
    let (ck, config) = policy_and_config(&c)?;
    let pool = config.eval_pool()?;
    let summary = evaluate(
        &ck.trainer.agent,
        &pool,
        config.eval.group_size,
        config.eval.repeats,
        config.eval.seed,
    )?;
    print!("{}", summary.table());
    if let Some(out) = c.out {
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join("eval.csv");
        summary.write_csv(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn export(c: Common, episodes: Option<usize>) -> Result<()> {
    let (ck, config) = policy_and_config(&c)?;
    let pool = config.eval_pool()?;
    let out = c.out.unwrap_or_else(|| config.run.out_dir.join("trajectories"));
    let paths = export_trajectories(
        &ck.trainer.agent,
        pool.maps[0].clone(),
        &pool,
        episodes.unwrap_or(config.eval.export_episodes),
        config.eval.seed,
        &out,
    )?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
