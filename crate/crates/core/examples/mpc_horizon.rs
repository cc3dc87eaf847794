//! A small horizon sweep: certified MPC against plain adaptive MPC on ice.
//!
//! `cargo run --release --example mpc_horizon -- [seeds]`

use apsc_core::control::ControllerKind;
use apsc_core::experiment::horizon_sweep;
use apsc_core::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let seeds: Vec<u64> = (0..n).collect();
    let rows = horizon_sweep(
        &Scenario::default(),
        &[5, 10, 20],
        &[ControllerKind::ApscMpc, ControllerKind::Ampc],
        &seeds,
        None,
    )?;
    println!("{:>3} {:<10} {:>9} {:>9} {:>8} {:>10}", "T", "controller", "mean psi", "min psi", "v_x", "ms/step");
    for r in rows {
        println!(
            "{:>3} {:<10} {:>9.3} {:>9.3} {:>8.2} {:>10.1}",
            r.horizon,
            r.controller.name(),
            r.mean_psi,
            r.mean_min_psi,
            r.mean_vx,
            1e3 * r.per_step_s
        );
    }
    Ok(())
}
