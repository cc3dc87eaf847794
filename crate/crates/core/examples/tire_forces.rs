//! Longitudinal LuGre force of one wheel against slip, for the three road
//! classes. Prints CSV: `slip,mu,fx_n`.

use apsc_core::scenario::RoadClass;
use apsc_core::vehicle::{lugre_forces, VehicleParams, VehicleState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = VehicleParams::default();
    let vx = 10.0;
    println!("slip,mu,fx_n");
    for class in RoadClass::ALL {
        let (lo, hi) = class.mu_range();
        let mu = 0.5 * (lo + hi);
        for i in 0..=20 {
            let slip = -0.5 + 0.05 * i as f64;
            let wheel = vx * (1.0 + slip) / p.wheel_radius;
            let x = VehicleState { omega: [wheel; 4], ..VehicleState::cruising(vx, &p) };
            let f = lugre_forces(&x, &p, mu)?;
            println!("{slip:.2},{mu:.2},{:.1}", f.longitudinal[0]);
        }
    }
    Ok(())
}
