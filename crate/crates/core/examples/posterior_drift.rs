//! The friction belief moving from an icy prior toward a true value of 0.7.

use apsc_core::belief::{GaussianBelief, MeasurementModel};
use apsc_core::rng::{family, stream_rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = MeasurementModel { noise_variance: 0.1, ..Default::default() };
    let mut belief = GaussianBelief::new(0.3, 0.01)?;
    let mut rng = stream_rng(0, family::MEASUREMENT, 0);
    println!("k,measurement,mean,std");
    println!("0,,{:.4},{:.4}", belief.mean, belief.std());
    for k in 1..=50 {
        let y = model.sample(0.7, &mut rng);
        belief = belief.update(y, &model);
        println!("{k},{y:.4},{:.4},{:.4}", belief.mean, belief.std());
    }
    Ok(())
}
