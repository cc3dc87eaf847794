mod common;

use apsc_core::belief::{GaussianBelief, MeasurementModel};
use apsc_core::rng::{family, stream_rng};
use common::closed_form;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn sequential_updates_equal_the_batch_posterior() {
    let mut rng = stream_rng(11, family::MEASUREMENT, 0);
    for _ in 0..1000 {
        let prior = GaussianBelief::new(rng.gen_range(0.05..1.2), rng.gen_range(1e-4..0.5)).unwrap();
        let model = MeasurementModel { noise_variance: rng.gen_range(1e-3..1.0), ..Default::default() };
        let true_mu = rng.gen_range(0.05..1.2);
        let n = rng.gen_range(0..200);
        let ys: Vec<f64> = (0..n).map(|_| model.sample(true_mu, &mut rng)).collect();
        let post = prior.posterior_after_n(ys.iter().copied(), &model);
        let (mean, var) = closed_form(&prior, &ys, model.noise_variance);
        assert!((post.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0), "{} vs {mean}", post.mean);
        assert!((post.variance - var).abs() <= 1e-12 * var, "{} vs {var}", post.variance);
        assert_eq!(post.update_count as usize, n);
    }
}

#[test]
fn posterior_variance_does_not_depend_on_the_data() {
    let prior = GaussianBelief::new(0.3, 0.01).unwrap();
    let model = MeasurementModel::default();
    let a = prior.posterior_after_n([0.1, 0.2, 0.3], &model);
    let b = prior.posterior_after_n([1.1, 0.9, 0.05], &model);
    assert_eq!(a.variance, b.variance);
}

#[test]
fn credible_intervals_are_calibrated() {
    // μ drawn from the prior, unclamped measurements: the 95% posterior
    // interval should contain μ about 95% of the time.
    let prior = GaussianBelief::new(0.6, 0.04).unwrap();
    let model = MeasurementModel { noise_variance: 0.1, clamp_lo: -1e9, clamp_hi: 1e9 };
    let mut rng = stream_rng(5, family::FRICTION, 0);
    let trials = 4000;
    let hits = (0..trials)
        .filter(|_| {
            let mu = prior.sample(&mut rng);
            let post = prior.posterior_after_n((0..10).map(|_| model.sample(mu, &mut rng)).collect::<Vec<_>>(), &model);
            (mu - post.mean).abs() <= 1.96 * post.std()
        })
        .count();
    let coverage = hits as f64 / trials as f64;
    assert!((coverage - 0.95).abs() < 0.015, "coverage {coverage}");
}

#[test]
fn posterior_drifts_toward_the_true_friction() {
    // low-friction prior, true value 0.7: the seed-averaged mean rises at every step
    let prior = GaussianBelief::new(0.3, 0.01).unwrap();
    let model = MeasurementModel::default();
    let seeds = 400;
    let mut means = vec![0.0; 51];
    for seed in 0..seeds {
        let mut rng = stream_rng(seed, family::MEASUREMENT, 3);
        let mut b = prior;
        means[0] += b.mean;
        for m in means.iter_mut().skip(1) {
            b = b.update(model.sample(0.7, &mut rng), &model);
            *m += b.mean;
        }
    }
    assert!(means.windows(2).all(|w| w[1] > w[0]));
    let (ideal, _) = closed_form(&prior, &[0.7; 50], model.noise_variance);
    assert!((ideal - 0.38 / 0.6).abs() < 1e-12);
    assert!(means[50] / seeds as f64 <= ideal);
}

proptest! {
    #[test]
    fn one_update_adds_precisions(
        mean in 0.0f64..1.5, var in 1e-4f64..1.0, nv in 1e-4f64..1.0, y in -1.0f64..2.0,
    ) {
        let b = GaussianBelief::new(mean, var).unwrap();
        let post = b.update(y, &MeasurementModel { noise_variance: nv, ..Default::default() });
        let lhs = 1.0 / post.variance;
        let rhs = 1.0 / var + 1.0 / nv;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        prop_assert!(post.variance < var && post.variance < nv);
    }

    #[test]
    fn posterior_mean_is_a_convex_combination(
        mean in 0.0f64..1.5, var in 1e-4f64..1.0, nv in 1e-4f64..1.0, y in -1.0f64..2.0,
    ) {
        let b = GaussianBelief::new(mean, var).unwrap();
        let post = b.update(y, &MeasurementModel { noise_variance: nv, ..Default::default() });
        let (lo, hi) = (mean.min(y), mean.max(y));
        prop_assert!(post.mean >= lo - 1e-15 && post.mean <= hi + 1e-15);
        let w = var / (var + nv);
        prop_assert!((post.mean - ((1.0 - w) * mean + w * y)).abs() <= 1e-14);
    }

    #[test]
    fn fold_order_does_not_matter(ys in proptest::collection::vec(0.05f64..1.2, 0..30)) {
        let prior = GaussianBelief::new(0.5, 0.09).unwrap();
        let model = MeasurementModel::default();
        let forward = prior.posterior_after_n(ys.iter().copied(), &model);
        let backward = prior.posterior_after_n(ys.iter().rev().copied(), &model);
        prop_assert!((forward.mean - backward.mean).abs() <= 1e-12);
        prop_assert!((forward.variance - backward.variance).abs() <= 1e-15);
    }

    #[test]
    fn measurements_stay_in_the_clamp_range(mu in -5.0f64..5.0, seed in any::<u64>()) {
        let model = MeasurementModel::default();
        let y = model.sample(mu, &mut stream_rng(seed, family::MEASUREMENT, 0));
        prop_assert!(y >= model.clamp_lo && y <= model.clamp_hi);
    }
}
