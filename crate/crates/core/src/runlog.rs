//! Per-run records: step rows, summary metrics, and their on-disk form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::GaussianBelief;
use crate::control::ControllerKind;
use crate::scenario::Scenario;
use crate::vehicle::{ControlInput, VehicleState};

/// Lateral deviation below which a step counts as safe in the empirical metric (m).
pub const EMPIRICAL_SAFETY_LIMIT: f64 = 3.0;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("json error in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("run log has no steps")]
    Empty,
}

/// One control step: the state it started from, what was applied, and what
/// the certificate saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub steer: f64,
    pub omega_fl: f64,
    pub omega_fr: f64,
    pub omega_rl: f64,
    pub omega_rr: f64,
    pub torque: f64,
    pub s: f64,
    pub e: f64,
    pub psi_heading: f64,
    pub steer_rate: f64,
    pub torque_rate: f64,
    pub measurement: f64,
    /// Belief `H_k` used at this step.
    pub belief_mean: f64,
    pub belief_var: f64,
    /// `Ψ_{H_k}(X_k)`.
    pub psi: f64,
    pub psi_half_width: f64,
    pub psi_samples: usize,
    /// Constraint margin of the applied input; empty for uncertified controllers.
    pub margin: Option<f64>,
    pub feasible: bool,
}

impl StepRow {
    pub fn state(&self) -> VehicleState {
        VehicleState {
            vx: self.vx,
            vy: self.vy,
            yaw_rate: self.yaw_rate,
            steer: self.steer,
            omega: [self.omega_fl, self.omega_fr, self.omega_rl, self.omega_rr],
            torque: self.torque,
            s: self.s,
            lateral_error: self.e,
            heading_error: self.psi_heading,
        }
    }

    pub fn input(&self) -> ControlInput {
        ControlInput::new(self.steer_rate, self.torque_rate)
    }

    pub fn belief(&self) -> GaussianBelief {
        GaussianBelief { mean: self.belief_mean, variance: self.belief_var, update_count: self.step as u32 }
    }
}

/// Why an episode stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    RoadEnd,
    TimeLimit,
    BelowSpeedFloor,
    NumericFailure,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        matches!(self, Termination::BelowSpeedFloor | Termination::NumericFailure)
    }
}

/// Summary of one run, all computable from its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub min_psi: f64,
    /// Time average of `Ψ_k`.
    pub mean_psi: f64,
    pub mean_vx: f64,
    pub std_vx: f64,
    pub mean_abs_e: f64,
    pub std_abs_e: f64,
    pub max_abs_e: f64,
    /// Fraction of steps with `|e| < 3 m`.
    pub empirical_safety: f64,
    /// Every step had a feasible certified input and the run did not fail.
    pub feasible: bool,
    pub infeasible_steps: usize,
    pub final_belief_mean: f64,
    pub final_belief_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl RunMetrics {
    pub fn from_rows(
        rows: &[StepRow],
        final_belief: &GaussianBelief,
        termination: Termination,
    ) -> Result<Self, LogError> {
        if rows.is_empty() {
            return Err(LogError::Empty);
        }
        let n = rows.len() as f64;
        let (mean_vx, std_vx) = mean_std(rows.iter().map(|r| r.vx));
        let (mean_abs_e, std_abs_e) = mean_std(rows.iter().map(|r| r.e.abs()));
        let infeasible_steps = rows.iter().filter(|r| !r.feasible).count();
        Ok(Self {
            steps: rows.len(),
            min_psi: rows.iter().map(|r| r.psi).fold(f64::INFINITY, f64::min),
            mean_psi: rows.iter().map(|r| r.psi).sum::<f64>() / n,
            mean_vx,
            std_vx,
            mean_abs_e,
            std_abs_e,
            max_abs_e: rows.iter().map(|r| r.e.abs()).fold(0.0, f64::max),
            empirical_safety: rows.iter().filter(|r| r.e.abs() < EMPIRICAL_SAFETY_LIMIT).count() as f64 / n,
            feasible: infeasible_steps == 0 && !termination.is_failure(),
            infeasible_steps,
            final_belief_mean: final_belief.mean,
            final_belief_std: final_belief.std(),
        })
    }
}

/// Wall-clock measurements; kept apart from the rows so replays compare equal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    /// Total controller time, excluding logging (s).
    pub controller_s: f64,
    /// Mean controller time per step (s).
    pub per_step_s: f64,
    /// Mean time per step spent in the MPC search; zero for the other controllers (s).
    #[serde(default)]
    pub planner_per_step_s: f64,
    pub total_s: f64,
}

/// Everything except rows that identifies and summarises a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario_hash: String,
    pub seed: u64,
    pub controller: ControllerKind,
    pub true_mu: f64,
    pub prior_mean: f64,
    pub prior_std: f64,
    /// `Ψ(X_0)` and whether it cleared `1 − ε`.
    pub initial_psi: f64,
    pub initial_gate_passed: bool,
    pub termination: Termination,
    pub final_state: VehicleState,
    pub final_belief: GaussianBelief,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub scenario: Scenario,
    pub meta: RunMeta,
    pub rows: Vec<StepRow>,
    pub timing: RunTiming,
}

pub const SCENARIO_FILE: &str = "scenario.json";
pub const ROWS_FILE: &str = "rows.csv";
pub const META_FILE: &str = "meta.json";
pub const TIMING_FILE: &str = "timing.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.display().to_string(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> LogError + '_ {
    move |source| LogError::Json { path: path.display().to_string(), source }
}

/// Rows as CSV bytes, with a header. Floats use the shortest round-trip form.
pub fn rows_to_csv(rows: &[StepRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn rows_from_csv(bytes: &[u8]) -> Result<Vec<StepRow>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

impl RunLog {
    pub fn metrics(&self) -> &RunMetrics {
        &self.meta.metrics
    }

    pub fn rows_csv(&self) -> Vec<u8> {
        rows_to_csv(&self.rows)
    }

    /// Writes the run into `dir` (created if needed).
    pub fn save(&self, dir: &Path) -> Result<PathBuf, LogError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write = |name: &str, bytes: Vec<u8>| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(io_err(&p))
        };
        write(SCENARIO_FILE, serde_json::to_vec_pretty(&self.scenario).expect("scenario serializes"))?;
        write(ROWS_FILE, self.rows_csv())?;
        write(META_FILE, serde_json::to_vec_pretty(&self.meta).expect("meta serializes"))?;
        write(TIMING_FILE, serde_json::to_vec_pretty(&self.timing).expect("timing serializes"))?;
        Ok(dir.to_path_buf())
    }

    pub fn load(dir: &Path) -> Result<Self, LogError> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(io_err(&p)).map(|b| (p, b))
        };
        let (p, bytes) = read(SCENARIO_FILE)?;
        let scenario: Scenario = serde_json::from_slice(&bytes).map_err(json_err(&p))?;
        let (p, bytes) = read(META_FILE)?;
        let meta: RunMeta = serde_json::from_slice(&bytes).map_err(json_err(&p))?;
        let (p, bytes) = read(ROWS_FILE)?;
        let rows = rows_from_csv(&bytes).map_err(|source| LogError::Csv { path: p.display().to_string(), source })?;
        let timing = match read(TIMING_FILE) {
            Ok((p, bytes)) => serde_json::from_slice(&bytes).map_err(json_err(&p))?,
            Err(_) => RunTiming::default(),
        };
        Ok(Self { scenario, meta, rows, timing })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(step: usize, e: f64, vx: f64, psi: f64) -> StepRow {
        let x = VehicleState { lateral_error: e, ..VehicleState::cruising(vx, &Default::default()) };
        StepRow {
            step,
            t: step as f64 * 0.2,
            vx: x.vx,
            vy: x.vy,
            yaw_rate: x.yaw_rate,
            steer: x.steer,
            omega_fl: x.omega[0],
            omega_fr: x.omega[1],
            omega_rl: x.omega[2],
            omega_rr: x.omega[3],
            torque: 0.0,
            s: step as f64,
            e,
            psi_heading: 0.0,
            steer_rate: 0.1,
            torque_rate: -3.0,
            measurement: 0.31,
            belief_mean: 0.3,
            belief_var: 0.01,
            psi,
            psi_half_width: 0.01,
            psi_samples: 100,
            margin: if step.is_multiple_of(2) { Some(0.5) } else { None },
            feasible: true,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<_> = (0..5).map(|k| row(k, 0.1 * k as f64 + 1e-17, 7.0 + 1.0 / 3.0, 0.93)).collect();
        let bytes = rows_to_csv(&rows);
        let back = rows_from_csv(&bytes).unwrap();
        assert_eq!(back, rows);
        assert_eq!(rows_to_csv(&back), bytes);
    }

    #[test]
    fn metrics_reduce_rows() {
        let rows = vec![row(0, 1.0, 6.0, 1.0), row(1, -4.0, 8.0, 0.5)];
        let m = RunMetrics::from_rows(&rows, &GaussianBelief::new(0.3, 0.01).unwrap(), Termination::RoadEnd).unwrap();
        assert_eq!(m.mean_vx, 7.0);
        assert_eq!(m.std_vx, 1.0);
        assert_eq!(m.mean_abs_e, 2.5);
        assert_eq!(m.empirical_safety, 0.5);
        assert_eq!((m.min_psi, m.mean_psi), (0.5, 0.75));
        assert!(m.feasible);
    }

    #[test]
    fn empty_rows_are_an_error() {
        let b = GaussianBelief::new(0.3, 0.01).unwrap();
        assert!(matches!(RunMetrics::from_rows(&[], &b, Termination::RoadEnd), Err(LogError::Empty)));
    }
}
