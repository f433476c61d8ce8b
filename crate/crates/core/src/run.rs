//! The training loop behind `lstc train`: epochs until the step budget is
//! spent, with metrics rows and checkpoints written along the way.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::metrics::{MetricsError, MetricsRow, MetricsWriter};
use crate::train::{EpochReport, TrainError};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Number of epochs a step budget buys (at least one).
pub fn epoch_budget(config: &RunConfig) -> u64 {
    (config.run.total_steps / config.train.batch_size as u64).max(1)
}

/// Trains from scratch, or from `resume` when given, writing into `out_dir`:
/// `metrics.csv`, `checkpoint.bin` (latest) and `checkpoints/epoch_NNNN.bin`
/// every `checkpoint_every` epochs. Returns the reports of the epochs run
/// by this call.
pub fn train_run(
    config: &RunConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<Vec<EpochReport>, RunError> {
    let io_err = |path: &Path, source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let pool = config.train_pool()?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let (mut trainer, mut metrics) = match resume {
        Some(ck) => {
            let epoch = ck.trainer.epoch;
            (ck.trainer, MetricsWriter::resume(&metrics_path, epoch)?)
        }
        None => (config.trainer(), MetricsWriter::create(&metrics_path)?),
    };
    let epochs = epoch_budget(config);
    let mut reports = Vec::new();
    while trainer.epoch < epochs {
        let report = trainer.train_epoch(&pool)?;
        metrics.append(&MetricsRow::from(&report))?;
        let every = config.run.checkpoint_every;
        if every > 0 && trainer.epoch % every == 0 && trainer.epoch < epochs {
            let dir = out_dir.join("checkpoints");
            std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
            let ck = Checkpoint::new(config.clone(), trainer.clone());
            ck.save(&dir.join(format!("epoch_{:04}.bin", trainer.epoch)))?;
            ck.save(&out_dir.join(CHECKPOINT_FILE))?;
        }
        reports.push(report);
    }
    Checkpoint::new(config.clone(), trainer).save(&out_dir.join(CHECKPOINT_FILE))?;
    Ok(reports)
}
