//! Batch experiments: grids of scenarios, horizon sweeps, replays and plots.

mod grid;
mod plots;
mod replay;
mod sweep;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::runlog::LogError;
use crate::scenario::ScenarioError;

pub use grid::{
    aggregate, infeasible_cells, run_grid, CellAggregate, CellStats, ExperimentGrid, GridCell, GridSummary, RunRecord,
    INFEASIBLE_BELOW,
};
pub use plots::{emit_plots, posterior_points, trajectory_points, PosteriorPoint, TradeoffPoint, TrajectoryPoint};
pub use replay::{replay, ReplayReport};
pub use sweep::{horizon_sweep, HorizonRow};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("i/o error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("missing run logs: {}", .0.join(", "))]
    MissingLogs(Vec<String>),
    #[error("plot rendering failed: {0}")]
    Plot(String),
    #[error("scenario hash mismatch: log records {recorded}, stored scenario hashes to {actual}")]
    HashMismatch { recorded: String, actual: String },
}

fn create_parent(path: &Path) -> Result<(), ExperimentError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.to_path_buf(), source })
        }
        _ => Ok(()),
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), ExperimentError> {
    create_parent(path)?;
    let format = |e: csv::Error| ExperimentError::Format { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(format)?;
    for row in rows {
        w.serialize(row).map_err(format)?;
    }
    w.flush().map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ExperimentError> {
    let format = |e: csv::Error| ExperimentError::Format { path: path.to_path_buf(), message: e.to_string() };
    csv::Reader::from_path(path).map_err(format)?.deserialize().collect::<Result<_, _>>().map_err(format)
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    create_parent(path)?;
    let bytes = serde_json::to_vec_pretty(value).expect("experiment records serialize");
    std::fs::write(path, bytes).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let bytes = std::fs::read(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ExperimentError::Format { path: path.to_path_buf(), message: e.to_string() })
}
