use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{run_episode, ControllerKind};
use crate::scenario::Scenario;

use super::{write_csv, ExperimentError};

/// Safety and compute for one controller at one MPC horizon, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub controller: ControllerKind,
    pub runs: usize,
    pub failures: usize,
    /// Mean over runs of the time-averaged safety probability.
    pub mean_psi: f64,
    pub mean_min_psi: f64,
    pub empirical_safety: f64,
    pub mean_vx: f64,
    /// Controller wall time per step (s).
    pub per_step_s: f64,
    /// Share of `per_step_s` spent in the MPC search (s).
    pub planner_per_step_s: f64,
}

/// Runs `base` at each horizon for each controller and seed.
///
/// Episodes run one after another so the per-step timings are not skewed by
/// sibling episodes competing for cores; the rollouts inside each episode
/// still use the thread pool. When `out_dir` is given the logs land in
/// `T<horizon>/<controller>/seed-<n>/` and the table in `horizons.csv`.
pub fn horizon_sweep(
    base: &Scenario,
    horizons: &[usize],
    controllers: &[ControllerKind],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<HorizonRow>, ExperimentError> {
    if horizons.contains(&0) {
        return Err(ExperimentError::InvalidGrid("horizons must be positive".into()));
    }
    let mut rows = Vec::with_capacity(horizons.len() * controllers.len());
    for &horizon in horizons {
        for &controller in controllers {
            let mut scenario = base.clone();
            scenario.mpc.horizon = horizon;
            scenario.controller = controller;
            let mut acc = [0.0f64; 6];
            let mut ok = 0usize;
            for &seed in seeds {
                let Ok(log) = run_episode(&scenario, seed) else { continue };
                if let Some(dir) = out_dir {
                    log.save(&dir.join(format!("T{horizon}")).join(controller.name()).join(format!("seed-{seed}")))?;
                }
                let m = log.metrics();
                for (a, v) in acc.iter_mut().zip([
                    m.mean_psi,
                    m.min_psi,
                    m.empirical_safety,
                    m.mean_vx,
                    log.timing.per_step_s,
                    log.timing.planner_per_step_s,
                ]) {
                    *a += v;
                }
                ok += 1;
            }
            let n = ok.max(1) as f64;
            let avg = |i: usize| if ok == 0 { f64::NAN } else { acc[i] / n };
            rows.push(HorizonRow {
                horizon,
                controller,
                runs: seeds.len(),
                failures: seeds.len() - ok,
                mean_psi: avg(0),
                mean_min_psi: avg(1),
                empirical_safety: avg(2),
                mean_vx: avg(3),
                per_step_s: avg(4),
                planner_per_step_s: avg(5),
            });
        }
    }
    if let Some(dir) = out_dir {
        write_csv(&dir.join("horizons.csv"), rows.iter())?;
    }
    Ok(rows)
}
