//! Training orchestration: schedules, metrics, checkpoints, plots.

mod config;
mod dogfight;
mod metrics;
mod plot;
mod svg;
mod train;
mod trajectory;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bc::BcError;
use crate::container::ContainerError;
use crate::net::{CollectError, EnvError, RemoteError};
use crate::replay::ReplayError;
use crate::sim::SimError;
use crate::td3::Td3Error;

pub use config::{BcSection, RemoteSection, RunConfig, Schedule, Seeds, Td3Section};
pub use dogfight::{train_dogfight, DogfightOutcome, AGENT_CHECKPOINTS};
pub use metrics::{read_metrics, without_wall_clock, MetricsRecord, MetricsWriter, Phase};
pub use plot::{emit_plots, moving_average, MOVING_AVERAGE_WINDOW};
pub use svg::{polyline_vertex_counts, LineChart, Series};
pub use train::{
    train, validate, validate_with, TrainOutcome, Validation, BEST_CHECKPOINT, FINAL_CHECKPOINT, LATEST_CHECKPOINT,
    METRICS_FILE, TRAJECTORY_DIR,
};
pub use trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("training diverged in episode {episode}; last good state is {}", checkpoint.display())]
    Divergence { episode: usize, checkpoint: PathBuf },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Td3(#[from] Td3Error),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Collect(#[from] CollectError),
}

impl From<RemoteError> for HarnessError {
    fn from(e: RemoteError) -> Self {
        Self::Env(e.into())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| HarnessError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests;
