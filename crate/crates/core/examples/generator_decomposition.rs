//! Splits the estimated generator into its state and belief parts for a few
//! candidate inputs at one state.

use apsc_core::belief::{GaussianBelief, MeasurementModel};
use apsc_core::certificate::{constraint_satisfied, MonteCarloPsi};
use apsc_core::scenario::Scenario;
use apsc_core::vehicle::{ControlInput, VehicleState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::default();
    let sys = sc.rollout_system();
    let psc = sc.psc_config();
    let b0 = GaussianBelief::from_std(0.3, 0.1)?;
    // A reading above the prior, so the belief part is visible.
    let b1 = b0.update(0.4, &MeasurementModel::from_std(0.1));
    let x = VehicleState { s: 70.0, lateral_error: 1.2, ..sc.initial_state() };
    let mc = MonteCarloPsi::new(5, psc.mc_samples, psc.horizon);
    println!("{:>10} {:>10} {:>9} {:>9} {:>9} {:>9}", "steer", "torque", "S", "T", "A", "margin");
    for u in
        [ControlInput::ZERO, ControlInput::new(0.5, 0.0), ControlInput::new(-0.5, 0.0), ControlInput::new(0.0, -2000.0)]
    {
        let terms = mc.generator_terms(&sys, &x, &u, &b0, &b1, psc.dt, psc.inner_samples);
        let (s, t) = terms.split();
        let check = constraint_satisfied(terms.psi_k, terms.generator(), &psc);
        println!(
            "{:>10.2} {:>10.0} {s:>9.3} {t:>9.3} {:>9.3} {:>9.3}",
            u.steer_rate,
            u.torque_rate,
            terms.generator(),
            check.margin
        );
    }
    Ok(())
}
