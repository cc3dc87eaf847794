//! The exact safety filter on the one-dimensional toy walk: a desired push
//! toward the barrier is held back so the safety probability stays above
//! the level.

use apsc_core::belief::{GaussianBelief, MeasurementModel};
use apsc_core::certificate::toy::{certified_episode, ToyWalk};
use apsc_core::certificate::{PscConfig, SafetyHorizon};
use apsc_core::rng::{family, stream_rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = ToyWalk::default();
    let config = PscConfig {
        epsilon: 0.1,
        gamma_gain: 1.0,
        dt: toy.dt,
        mc_samples: 1,
        inner_samples: 1,
        horizon: SafetyHorizon { steps: 4, dt_eval: toy.dt },
        candidates: vec![-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0],
    };
    let model = MeasurementModel { noise_variance: 0.2, clamp_lo: -5.0, clamp_hi: 5.0 };
    let mut rng = stream_rng(0, family::MEASUREMENT, 0);
    let mut beliefs = vec![GaussianBelief::new(0.0, 0.09)?];
    for _ in 0..15 {
        let b = beliefs.last().expect("non-empty").update(model.sample(0.3, &mut rng), &model);
        beliefs.push(b);
    }
    let run = certified_episode(&toy, &beliefs, 0.0, 1.0, &config, &mut stream_rng(0, family::PLANT, 0));
    println!("k,x,input,psi,feasible");
    for (k, f) in run.filter.iter().enumerate() {
        println!("{k},{:.3},{},{:.3},{}", run.states[k], f.input, run.psi[k], f.feasible);
    }
    Ok(())
}
