use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::SafeSetSpec;
use crate::control::{run_episode, ControllerKind};
use crate::runlog::{RunLog, RunMetrics};
use crate::scenario::{FrictionSpec, PriorSpec, RoadClass, Scenario};

use super::{write_csv, write_json, ExperimentError};

/// Cells whose every controller averages a minimum safety probability below
/// this are reported as infeasible.
pub const INFEASIBLE_BELOW: f64 = 0.3;

/// Cartesian sweep over road class, prior, estimator noise, safe-set width
/// and MPC horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub classes: Vec<RoadClass>,
    /// Use the tight per-class friction ranges instead of the wide ones.
    pub narrow_ranges: bool,
    pub prior_means: Vec<f64>,
    pub prior_stds: Vec<f64>,
    /// Standard deviation of measurement noise assumed by the estimator.
    pub measurement_stds: Vec<f64>,
    pub e_max: Vec<f64>,
    pub horizons: Vec<usize>,
    pub runs_per_cell: usize,
    pub first_seed: u64,
}

impl Default for ExperimentGrid {
    /// The full 108-setting sweep.
    fn default() -> Self {
        Self {
            classes: RoadClass::ALL.to_vec(),
            narrow_ranges: true,
            prior_means: vec![0.3, 0.5, 0.9],
            prior_stds: vec![0.05, 0.3],
            measurement_stds: vec![0.05, 0.3],
            e_max: vec![3.0, 5.0, 10.0],
            horizons: vec![10],
            runs_per_cell: 20,
            first_seed: 0,
        }
    }
}

impl ExperimentGrid {
    /// One icy cell; enough to compare controllers in minutes.
    pub fn reduced() -> Self {
        Self {
            classes: vec![RoadClass::Icy],
            prior_means: vec![0.3],
            prior_stds: vec![0.05],
            measurement_stds: vec![0.3],
            e_max: vec![3.0],
            ..Self::default()
        }
    }

    /// Reads a TOML grid; omitted keys take the full-sweep defaults.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        let grid: Self =
            toml::from_str(&text).map_err(|e| ExperimentError::Format { path: path.into(), message: e.to_string() })?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidGrid(m.into()));
        if self.classes.is_empty()
            || self.prior_means.is_empty()
            || self.prior_stds.is_empty()
            || self.measurement_stds.is_empty()
            || self.e_max.is_empty()
            || self.horizons.is_empty()
        {
            return bad("every axis needs at least one value");
        }
        if self.runs_per_cell == 0 {
            return bad("runs_per_cell must be positive");
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.prior_stds) || !positive(&self.measurement_stds) || !positive(&self.e_max) {
            return bad("standard deviations and e_max must be positive");
        }
        if !self.prior_means.iter().all(|m| m.is_finite()) || self.horizons.contains(&0) {
            return bad("prior means must be finite and horizons positive");
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &class in &self.classes {
            let friction = if self.narrow_ranges { FrictionSpec::narrow(class) } else { FrictionSpec::class(class) };
            for &prior_mean in &self.prior_means {
                for &prior_std in &self.prior_stds {
                    for &measurement_std in &self.measurement_stds {
                        for &e_max in &self.e_max {
                            for &horizon in &self.horizons {
                                cells.push(GridCell {
                                    index: cells.len(),
                                    class,
                                    friction,
                                    prior_mean,
                                    prior_std,
                                    measurement_std,
                                    e_max,
                                    horizon,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + Clone {
        self.first_seed..self.first_seed + self.runs_per_cell as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub class: RoadClass,
    pub friction: FrictionSpec,
    pub prior_mean: f64,
    pub prior_std: f64,
    pub measurement_std: f64,
    pub e_max: f64,
    pub horizon: usize,
}

impl GridCell {
    pub fn label(&self) -> String {
        format!(
            "{}_mu{}_sd{}_ms{}_e{}_T{}",
            self.class.name(),
            self.prior_mean,
            self.prior_std,
            self.measurement_std,
            self.e_max,
            self.horizon
        )
    }

    pub fn scenario(&self, base: &Scenario, controller: ControllerKind) -> Scenario {
        let mut s = base.clone().with_estimator_std(self.measurement_std);
        s.name = format!("{}/{}", base.name, self.label());
        s.controller = controller;
        s.friction = self.friction;
        s.prior = PriorSpec { mean: self.prior_mean, std: self.prior_std };
        s.safe_set = SafeSetSpec { e_max: self.e_max };
        s.mpc.horizon = self.horizon;
        s
    }
}

/// One attempted run. Exactly one of `metrics` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: usize,
    pub controller: ControllerKind,
    pub seed: u64,
    pub log_dir: Option<PathBuf>,
    pub metrics: Option<RunMetrics>,
    pub per_step_s: Option<f64>,
    pub error: Option<String>,
}

impl RunRecord {
    fn from_log(cell: usize, seed: u64, log: &RunLog, log_dir: Option<PathBuf>) -> Self {
        Self {
            cell,
            controller: log.meta.controller,
            seed,
            log_dir,
            metrics: Some(log.meta.metrics.clone()),
            per_step_s: Some(log.timing.per_step_s),
            error: None,
        }
    }
}

/// Means over the successful runs of one controller in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean_min_psi: f64,
    pub mean_psi: f64,
    pub mean_vx: f64,
    pub mean_abs_e: f64,
    pub empirical_safety: f64,
    pub feasible_fraction: f64,
    pub per_step_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub cell: usize,
    pub label: String,
    pub controller: ControllerKind,
    pub runs: usize,
    pub failures: usize,
    /// `None` when every run failed.
    pub stats: Option<CellStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid: ExperimentGrid,
    pub controllers: Vec<ControllerKind>,
    pub cells: Vec<GridCell>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<CellAggregate>,
    pub infeasible_cells: Vec<usize>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Per-(cell, controller) means, in cell-major then controller order.
pub fn aggregate(cells: &[GridCell], controllers: &[ControllerKind], runs: &[RunRecord]) -> Vec<CellAggregate> {
    let mut out = Vec::with_capacity(cells.len() * controllers.len());
    for cell in cells {
        for &controller in controllers {
            let mine: Vec<&RunRecord> =
                runs.iter().filter(|r| r.cell == cell.index && r.controller == controller).collect();
            let ok: Vec<(&RunMetrics, f64)> =
                mine.iter().filter_map(|r| Some((r.metrics.as_ref()?, r.per_step_s.unwrap_or(0.0)))).collect();
            let stats = (!ok.is_empty()).then(|| CellStats {
                mean_min_psi: mean(ok.iter().map(|(m, _)| m.min_psi)),
                mean_psi: mean(ok.iter().map(|(m, _)| m.mean_psi)),
                mean_vx: mean(ok.iter().map(|(m, _)| m.mean_vx)),
                mean_abs_e: mean(ok.iter().map(|(m, _)| m.mean_abs_e)),
                empirical_safety: mean(ok.iter().map(|(m, _)| m.empirical_safety)),
                feasible_fraction: mean(ok.iter().map(|(m, _)| if m.feasible { 1.0 } else { 0.0 })),
                per_step_s: mean(ok.iter().map(|(_, t)| *t)),
            });
            out.push(CellAggregate {
                cell: cell.index,
                label: cell.label(),
                controller,
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                stats,
            });
        }
    }
    out
}

/// Cells where no controller reaches an average minimum safety probability
/// of [`INFEASIBLE_BELOW`]. Controllers whose runs all failed count as below.
pub fn infeasible_cells(aggregates: &[CellAggregate]) -> Vec<usize> {
    let mut cells: Vec<usize> = aggregates.iter().map(|a| a.cell).collect();
    cells.dedup();
    cells
        .into_iter()
        .filter(|&c| {
            aggregates
                .iter()
                .filter(|a| a.cell == c)
                .all(|a| a.stats.as_ref().is_none_or(|s| s.mean_min_psi < INFEASIBLE_BELOW))
        })
        .collect()
}

/// Runs every cell × controller × seed and reduces the results.
///
/// With `out_dir`, each run is written to
/// `runs/<cell label>/<controller>/seed-<n>/` and the summary to
/// `summary.json`, `aggregates.csv` and `tradeoff.csv`. A failing run is
/// recorded and the batch continues.
pub fn run_grid(
    base: &Scenario,
    grid: &ExperimentGrid,
    controllers: &[ControllerKind],
    out_dir: Option<&Path>,
) -> Result<GridSummary, ExperimentError> {
    grid.validate()?;
    if controllers.is_empty() {
        return Err(ExperimentError::InvalidGrid("no controllers given".into()));
    }
    let cells = grid.cells();
    let jobs: Vec<(GridCell, ControllerKind, u64)> = cells
        .iter()
        .flat_map(|c| controllers.iter().flat_map(move |&k| grid.seeds().map(move |s| (*c, k, s))))
        .collect();

    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(cell, controller, seed)| {
            let failed = |e: String| RunRecord {
                cell: cell.index,
                controller,
                seed,
                log_dir: None,
                metrics: None,
                per_step_s: None,
                error: Some(e),
            };
            let log = match run_episode(&cell.scenario(base, controller), seed) {
                Ok(log) => log,
                Err(e) => return failed(e.to_string()),
            };
            let dir =
                out_dir.map(|d| d.join("runs").join(cell.label()).join(controller.name()).join(format!("seed-{seed}")));
            if let Some(dir) = &dir {
                if let Err(e) = log.save(dir) {
                    return failed(e.to_string());
                }
            }
            RunRecord::from_log(cell.index, seed, &log, dir)
        })
        .collect();

    let aggregates = aggregate(&cells, controllers, &runs);
    let summary = GridSummary {
        grid: grid.clone(),
        controllers: controllers.to_vec(),
        infeasible_cells: infeasible_cells(&aggregates),
        cells,
        runs,
        aggregates,
    };
    if let Some(dir) = out_dir {
        summary.write(dir)?;
    }
    Ok(summary)
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    cell: usize,
    label: &'a str,
    controller: &'a str,
    runs: usize,
    failures: usize,
    mean_min_psi: Option<f64>,
    mean_psi: Option<f64>,
    mean_vx: Option<f64>,
    mean_abs_e: Option<f64>,
    empirical_safety: Option<f64>,
    feasible_fraction: Option<f64>,
    per_step_s: Option<f64>,
    infeasible_cell: bool,
}

#[derive(Serialize)]
struct TradeoffRow<'a> {
    label: &'a str,
    controller: &'a str,
    mean_min_psi: Option<f64>,
    mean_vx: Option<f64>,
}

impl GridSummary {
    pub const FILE: &'static str = "summary.json";

    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        write_json(&dir.join(Self::FILE), self)?;
        let rows = self.aggregates.iter().map(|a| {
            let s = a.stats.as_ref();
            AggregateRow {
                cell: a.cell,
                label: &a.label,
                controller: a.controller.name(),
                runs: a.runs,
                failures: a.failures,
                mean_min_psi: s.map(|s| s.mean_min_psi),
                mean_psi: s.map(|s| s.mean_psi),
                mean_vx: s.map(|s| s.mean_vx),
                mean_abs_e: s.map(|s| s.mean_abs_e),
                empirical_safety: s.map(|s| s.empirical_safety),
                feasible_fraction: s.map(|s| s.feasible_fraction),
                per_step_s: s.map(|s| s.per_step_s),
                infeasible_cell: self.infeasible_cells.contains(&a.cell),
            }
        });
        write_csv(&dir.join("aggregates.csv"), rows)?;
        let trade = self.aggregates.iter().map(|a| TradeoffRow {
            label: &a.label,
            controller: a.controller.name(),
            mean_min_psi: a.stats.as_ref().map(|s| s.mean_min_psi),
            mean_vx: a.stats.as_ref().map(|s| s.mean_vx),
        });
        write_csv(&dir.join("tradeoff.csv"), trade)
    }

    pub fn load(dir: &Path) -> Result<Self, ExperimentError> {
        super::read_json(&dir.join(Self::FILE))
    }

    pub fn aggregate_for(&self, cell: usize, controller: ControllerKind) -> Option<&CellAggregate> {
        self.aggregates.iter().find(|a| a.cell == cell && a.controller == controller)
    }

    /// Aggregates recomputed from the run logs on disk rather than from the
    /// in-memory records.
    pub fn reaggregate_from_logs(&self) -> Result<Vec<CellAggregate>, ExperimentError> {
        let runs = self
            .runs
            .iter()
            .map(|r| match &r.log_dir {
                Some(dir) => {
                    let log = RunLog::load(dir)?;
                    Ok(RunRecord::from_log(r.cell, r.seed, &log, Some(dir.clone())))
                }
                None => Ok(r.clone()),
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        Ok(aggregate(&self.cells, &self.controllers, &runs))
    }
}
