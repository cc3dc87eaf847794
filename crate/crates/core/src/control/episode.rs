use std::time::Instant;

use crate::certificate::MonteCarloPsi;
use crate::rng::{derive_seed, family, stream_rng};
use crate::runlog::{RunLog, RunMeta, RunMetrics, RunTiming, StepRow, Termination};
use crate::scenario::{Scenario, ScenarioError};
use crate::vehicle::{ControlInput, StepStatus};

use super::{certified_choice, mpc_plan, nominal, safe_filter, ControllerKind};

/// Seed of the safety-probability sample set at control step `k`.
pub fn step_seed(seed: u64, k: usize) -> u64 {
    derive_seed(derive_seed(seed, family::PSI), k as u64)
}

/// One closed-loop episode: measure, update the belief, evaluate the safety
/// probability, choose the input, advance the plant.
///
/// The run is a pure function of `(scenario, seed)` apart from `timing`.
pub fn run_episode(scenario: &Scenario, seed: u64) -> Result<RunLog, ScenarioError> {
    scenario.validate()?;
    let started = Instant::now();
    let world = scenario.world();
    let sys = scenario.rollout_system();
    let psc = scenario.psc_config();
    let prior = scenario.prior_belief()?;
    let assumed = scenario.measurement.assumed();
    let sensor = scenario.measurement.sensor();
    let true_mu = scenario.friction.draw(seed);
    let mut plant_rng = stream_rng(seed, family::PLANT, 0);
    let mut sensor_rng = stream_rng(seed, family::MEASUREMENT, 0);

    let mut x = scenario.initial_state();
    let mut belief = prior;
    let initial_psi = MonteCarloPsi::new(step_seed(seed, 0), psc.mc_samples, psc.horizon).estimate(&sys, &x, &belief);

    let mut rows = Vec::new();
    let mut controller_s = 0.0;
    let mut planner_s = 0.0;
    let mut monitor_s = 0.0;
    let road_length = scenario.road.length();
    let max_steps = (scenario.max_time / scenario.dt).round() as usize;
    let mut termination = Termination::TimeLimit;

    for k in 0..max_steps {
        if x.s >= road_length {
            termination = Termination::RoadEnd;
            break;
        }
        let measurement = sensor.sample(true_mu, &mut sensor_rng);
        let belief_next = if scenario.adaptive { belief.update(measurement, &assumed) } else { belief };
        let seed_k = step_seed(seed, k);

        let tick = Instant::now();
        let (input, psi, margin, feasible) = match scenario.controller {
            ControllerKind::Nominal | ControllerKind::Ampc => {
                let u = if scenario.controller == ControllerKind::Nominal {
                    nominal(&x, belief.mean, &scenario.road, &scenario.nominal, &scenario.bounds)
                } else {
                    let plan = mpc_plan(
                        &x,
                        belief.mean,
                        &world,
                        &scenario.mpc,
                        &scenario.bounds,
                        scenario.dt,
                        scenario.nominal.v_ref,
                    );
                    planner_s += tick.elapsed().as_secs_f64();
                    plan.inputs[0]
                };
                // Ψ is only monitored here, so it is kept out of the controller time.
                let monitor = Instant::now();
                let psi = MonteCarloPsi::new(seed_k, psc.mc_samples, psc.horizon).estimate(&sys, &x, &belief);
                monitor_s += monitor.elapsed().as_secs_f64();
                (u, psi, None, true)
            }
            ControllerKind::ApscFilter => {
                let pi = nominal(&x, belief.mean, &scenario.road, &scenario.nominal, &scenario.bounds);
                let step = safe_filter(&sys, &x, &belief, &belief_next, pi, &psc, &scenario.bounds, seed_k);
                (step.filter.input, step.psi, Some(step.filter.margin), step.filter.feasible)
            }
            ControllerKind::ApscMpc => {
                let plan = mpc_plan(
                    &x,
                    belief.mean,
                    &world,
                    &scenario.mpc,
                    &scenario.bounds,
                    scenario.dt,
                    scenario.nominal.v_ref,
                );
                planner_s += tick.elapsed().as_secs_f64();
                let costs = plan.first_costs.clone();
                let index_of = |u: &ControlInput| plan.first_inputs.iter().position(|c| c == u).expect("grid input");
                let step = certified_choice(
                    &sys,
                    &x,
                    &belief,
                    &belief_next,
                    &plan.first_inputs,
                    |u| costs[index_of(u)],
                    &psc,
                    seed_k,
                );
                (step.filter.input, step.psi, Some(step.filter.margin), step.filter.feasible)
            }
        };
        controller_s += tick.elapsed().as_secs_f64();

        let out = world.step(&x, &input, true_mu, scenario.dt, &mut plant_rng)?;
        rows.push(StepRow {
            step: k,
            t: k as f64 * scenario.dt,
            vx: x.vx,
            vy: x.vy,
            yaw_rate: x.yaw_rate,
            steer: x.steer,
            omega_fl: x.omega[0],
            omega_fr: x.omega[1],
            omega_rl: x.omega[2],
            omega_rr: x.omega[3],
            torque: x.torque,
            s: x.s,
            e: x.lateral_error,
            psi_heading: x.heading_error,
            steer_rate: input.steer_rate,
            torque_rate: input.torque_rate,
            measurement,
            belief_mean: belief.mean,
            belief_var: belief.variance,
            psi: psi.value,
            psi_half_width: psi.half_width,
            psi_samples: psi.n_samples,
            margin,
            feasible,
        });
        x = out.state;
        belief = belief_next;
        match out.status {
            StepStatus::Running => {}
            StepStatus::BelowSpeedFloor => {
                termination = Termination::BelowSpeedFloor;
                break;
            }
            StepStatus::NonFinite => {
                termination = Termination::NumericFailure;
                break;
            }
        }
    }
    if termination == Termination::TimeLimit && x.s >= road_length {
        termination = Termination::RoadEnd;
    }

    let metrics =
        RunMetrics::from_rows(&rows, &belief, termination).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let steps = rows.len().max(1) as f64;
    Ok(RunLog {
        scenario: scenario.clone(),
        meta: RunMeta {
            scenario_hash: scenario.hash(),
            seed,
            controller: scenario.controller,
            true_mu,
            prior_mean: prior.mean,
            prior_std: prior.std(),
            initial_psi: initial_psi.value,
            initial_gate_passed: initial_psi.value > psc.threshold(),
            termination,
            final_state: x,
            final_belief: belief,
            metrics,
        },
        rows,
        timing: RunTiming {
            controller_s: controller_s - monitor_s,
            per_step_s: (controller_s - monitor_s) / steps,
            planner_per_step_s: planner_s / steps,
            total_s: started.elapsed().as_secs_f64(),
        },
    })
}
