//! One icy-curve episode under the nominal controller and under the
//! certified filter, same seed.
//!
//! `cargo run --release --example safe_filter_episode -- [seed]`

use apsc_core::control::{run_episode, ControllerKind};
use apsc_core::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    for controller in [ControllerKind::Nominal, ControllerKind::ApscFilter] {
        let log = run_episode(&Scenario { controller, ..Scenario::default() }, seed)?;
        let m = log.metrics();
        println!(
            "{controller:<12} mu*={:.2} steps={:<4} mean psi={:.3} min psi={:.3} max|e|={:.2} m  v_x={:.2} m/s  {:?}",
            log.meta.true_mu, m.steps, m.mean_psi, m.min_psi, m.max_abs_e, m.mean_vx, log.meta.termination
        );
    }
    Ok(())
}
