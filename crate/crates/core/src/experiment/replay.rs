use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::run_episode;
use crate::runlog::{RunLog, ROWS_FILE};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub dir: PathBuf,
    pub scenario_hash: String,
    pub seed: u64,
    /// The regenerated `rows.csv` equals the stored one byte for byte.
    pub rows_identical: bool,
    /// First differing CSV line (0 is the header), if any.
    pub first_difference: Option<usize>,
    pub meta_identical: bool,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.rows_identical && self.meta_identical
    }
}

/// Re-runs the stored scenario with the stored seed and compares the result
/// with what is on disk.
pub fn replay(dir: &Path) -> Result<ReplayReport, ExperimentError> {
    let log = RunLog::load(dir)?;
    let actual = log.scenario.hash();
    if actual != log.meta.scenario_hash {
        return Err(ExperimentError::HashMismatch { recorded: log.meta.scenario_hash.clone(), actual });
    }
    let rows_path = dir.join(ROWS_FILE);
    let stored = std::fs::read(&rows_path).map_err(|source| ExperimentError::Io { path: rows_path, source })?;
    let rerun = run_episode(&log.scenario, log.meta.seed)?;
    let fresh = rerun.rows_csv();
    let first_difference = (stored != fresh).then(|| {
        let a = stored.split(|b| *b == b'\n');
        let mut b = fresh.split(|b| *b == b'\n');
        a.enumerate()
            .find(|(_, line)| b.next() != Some(*line))
            .map_or_else(|| stored.split(|b| *b == b'\n').count(), |(i, _)| i)
    });
    let meta_identical = serde_json::to_vec(&rerun.meta).expect("meta serializes")
        == serde_json::to_vec(&log.meta).expect("meta serializes");
    Ok(ReplayReport {
        dir: dir.to_path_buf(),
        scenario_hash: log.meta.scenario_hash,
        seed: log.meta.seed,
        rows_identical: first_difference.is_none(),
        first_difference,
        meta_identical,
    })
}
