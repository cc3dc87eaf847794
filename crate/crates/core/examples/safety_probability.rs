//! Monte Carlo safety probability at the start of the curve as the lateral
//! offset grows, under a confident and a vague friction belief.

use apsc_core::belief::GaussianBelief;
use apsc_core::certificate::MonteCarloPsi;
use apsc_core::scenario::Scenario;
use apsc_core::vehicle::VehicleState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::default();
    let sys = sc.rollout_system();
    let mc = MonteCarloPsi::new(1, sc.psc.mc_samples, sc.psc.horizon);
    let beliefs = [("confident", GaussianBelief::from_std(0.3, 0.05)?), ("vague", GaussianBelief::from_std(0.3, 0.3)?)];
    println!("offset_m,belief,psi,half_width");
    for i in 0..=12 {
        let e = 0.25 * i as f64;
        let x = VehicleState { s: 60.0, lateral_error: e, ..sc.initial_state() };
        for (name, b) in &beliefs {
            let est = mc.estimate(&sys, &x, b);
            println!("{e:.2},{name},{:.3},{:.3}", est.value, est.half_width);
        }
    }
    Ok(())
}
