use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::runlog::{RunLog, META_FILE, ROWS_FILE};

use super::{write_csv, write_json, ExperimentError};

/// Plotted vehicle path; `x`, `y` are world coordinates of `(s, e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPoint {
    pub step: usize,
    pub t: f64,
    pub belief_mean: f64,
    pub belief_std: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub run: String,
    pub controller: String,
    pub min_psi: f64,
    pub mean_psi: f64,
    pub mean_vx: f64,
}

pub fn trajectory_points(log: &RunLog) -> Vec<TrajectoryPoint> {
    log.rows
        .iter()
        .map(|r| {
            let (x, y) = log.scenario.road.to_world(r.s, r.e);
            TrajectoryPoint { step: r.step, t: r.t, s: r.s, e: r.e, x, y }
        })
        .collect()
}

pub fn posterior_points(log: &RunLog) -> Vec<PosteriorPoint> {
    log.rows
        .iter()
        .map(|r| PosteriorPoint {
            step: r.step,
            t: r.t,
            belief_mean: r.belief_mean,
            belief_std: r.belief_var.sqrt(),
            psi: r.psi,
        })
        .collect()
}

fn plot_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Plot(e.to_string())
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad)..(hi + pad)
}

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> (std::ops::Range<f64>, std::ops::Range<f64>) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0..1.0, 0.0..1.0);
    }
    (padded(x0, x1), padded(y0, y1))
}

fn draw_trajectory(log: &RunLog, points: &[TrajectoryPoint], path: &Path) -> Result<(), ExperimentError> {
    let road = &log.scenario.road;
    let e_max = log.scenario.safe_set.e_max;
    let n = 200;
    let length = road.length();
    let line = |offset: f64| -> Vec<(f64, f64)> {
        (0..=n).map(|i| road.to_world(length * i as f64 / n as f64, offset)).collect()
    };
    let (centre, left, right) = (line(0.0), line(e_max), line(-e_max));
    let (xr, yr) = bounds(centre.iter().chain(&left).chain(&right).copied().chain(points.iter().map(|p| (p.x, p.y))));

    let root = SVGBackend::new(path, (900, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} seed {}", log.meta.controller, log.meta.seed), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr, yr)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw().map_err(plot_err)?;
    chart.draw_series(LineSeries::new(centre, BLACK.mix(0.4))).map_err(plot_err)?.label("centreline");
    for band in [left, right] {
        chart.draw_series(LineSeries::new(band, RED.mix(0.6))).map_err(plot_err)?;
    }
    chart
        .draw_series(LineSeries::new(points.iter().map(|p| (p.x, p.y)), BLUE.stroke_width(2)))
        .map_err(plot_err)?
        .label("vehicle");
    root.present().map_err(plot_err)
}

fn draw_posterior(points: &[PosteriorPoint], path: &Path) -> Result<(), ExperimentError> {
    let (xr, _) = bounds(points.iter().map(|p| (p.t, 0.0)));
    let (_, yr) = bounds(
        points
            .iter()
            .flat_map(|p| [(0.0, p.belief_mean - p.belief_std), (0.0, p.belief_mean + p.belief_std), (0.0, p.psi)]),
    );
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("friction belief and safety probability", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr, yr)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t (s)").draw().map_err(plot_err)?;
    chart.draw_series(LineSeries::new(points.iter().map(|p| (p.t, p.belief_mean)), &BLUE)).map_err(plot_err)?;
    for sign in [-1.0, 1.0] {
        chart
            .draw_series(LineSeries::new(
                points.iter().map(|p| (p.t, p.belief_mean + sign * p.belief_std)),
                BLUE.mix(0.3),
            ))
            .map_err(plot_err)?;
    }
    chart.draw_series(LineSeries::new(points.iter().map(|p| (p.t, p.psi)), &GREEN)).map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn draw_tradeoff(points: &[TradeoffPoint], path: &Path) -> Result<(), ExperimentError> {
    let (xr, yr) = bounds(points.iter().map(|p| (p.mean_vx, p.min_psi)));
    let root = SVGBackend::new(path, (700, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("safety vs efficiency", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xr, yr)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("mean v_x (m/s)").y_desc("min safety probability").draw().map_err(plot_err)?;
    chart
        .draw_series(points.iter().map(|p| Circle::new((p.mean_vx, p.min_psi), 4, BLUE.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Renders every run in `log_dirs` into `out_dir`.
///
/// Run `i` yields `run-<i>_trajectory.{svg,csv}` and
/// `run-<i>_posterior.{svg,csv}`; all runs together give
/// `tradeoff.{svg,csv}`. `plots.json` maps run names back to their
/// directories. Returns the written paths.
pub fn emit_plots(log_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let missing: Vec<String> = log_dirs
        .iter()
        .filter(|d| !d.join(ROWS_FILE).is_file() || !d.join(META_FILE).is_file())
        .map(|d| d.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingLogs(missing));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io { path: out_dir.to_path_buf(), source })?;

    let mut written = Vec::new();
    let mut tradeoff = Vec::with_capacity(log_dirs.len());
    let mut manifest = std::collections::BTreeMap::new();
    for (i, dir) in log_dirs.iter().enumerate() {
        let log = RunLog::load(dir)?;
        let name = format!("run-{i:03}");
        manifest.insert(name.clone(), dir.clone());

        let traj = trajectory_points(&log);
        let p = out_dir.join(format!("{name}_trajectory.svg"));
        draw_trajectory(&log, &traj, &p)?;
        written.push(p);
        let p = out_dir.join(format!("{name}_trajectory.csv"));
        write_csv(&p, traj.iter())?;
        written.push(p);

        let post = posterior_points(&log);
        let p = out_dir.join(format!("{name}_posterior.svg"));
        draw_posterior(&post, &p)?;
        written.push(p);
        let p = out_dir.join(format!("{name}_posterior.csv"));
        write_csv(&p, post.iter())?;
        written.push(p);

        let m = log.metrics();
        tradeoff.push(TradeoffPoint {
            run: name,
            controller: log.meta.controller.to_string(),
            min_psi: m.min_psi,
            mean_psi: m.mean_psi,
            mean_vx: m.mean_vx,
        });
    }
    if !tradeoff.is_empty() {
        let p = out_dir.join("tradeoff.svg");
        draw_tradeoff(&tradeoff, &p)?;
        written.push(p);
        let p = out_dir.join("tradeoff.csv");
        write_csv(&p, tradeoff.iter())?;
        written.push(p);
    }
    let p = out_dir.join("plots.json");
    write_json(&p, &manifest)?;
    written.push(p);
    Ok(written)
}
