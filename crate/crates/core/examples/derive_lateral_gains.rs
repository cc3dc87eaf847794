//! Recomputes the nominal controller's lateral gains by discrete LQR at the
//! reference speed and compares them with the built-in ones.

use apsc_core::control::{derive_lateral_gains, LqrWeights, NominalConfig, REFERENCE_SPEED};
use apsc_core::vehicle::VehicleParams;

fn main() {
    let derived = derive_lateral_gains(&VehicleParams::default(), REFERENCE_SPEED, 0.1, &LqrWeights::default());
    let built_in = NominalConfig::default().k_lateral;
    println!("{:>8} {:>12} {:>12}", "state", "derived", "built-in");
    for (name, (d, b)) in ["e", "psi", "v_y", "r", "delta"].iter().zip(derived.iter().zip(built_in)) {
        println!("{name:>8} {d:>12.5} {b:>12.5}");
    }
}
