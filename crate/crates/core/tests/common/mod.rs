//! Fixtures shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use apsc_core::belief::{GaussianBelief, MeasurementModel};
use apsc_core::certificate::toy::ToyWalk;
use apsc_core::certificate::{PscConfig, SafetyHorizon};
use apsc_core::guidance::{GuidanceExecutables, IssueKind};
use apsc_core::rng::{family, stream_rng};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// One broken document and the diagnostic it must produce.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub raw: String,
    pub field: String,
    pub kind: IssueKind,
}

const NUMERIC: [&str; 4] = ["e_max", "mu_0", "sigma_0", "bar_sigma"];
const ASSUMPTION_STRINGS: [&str; 3] = ["style", "road", "lane_quality"];

/// A valid document with filled-in assumptions, as a JSON object.
pub fn valid_value(e: &GuidanceExecutables) -> Value {
    json!({
        "e_max": e.e_max,
        "mu_0": e.mu_0,
        "sigma_0": e.sigma_0,
        "bar_sigma": e.bar_sigma,
        "assumptions": {"style": "balanced", "road": "wet", "speed_kmh": 40, "lane_quality": "good"},
        "rationale": "moderate settings",
    })
}

fn case(doc: &Value, field: &str, kind: IssueKind) -> FuzzCase {
    FuzzCase { raw: doc.to_string(), field: field.into(), kind }
}

fn malformed(raw: String) -> FuzzCase {
    FuzzCase { raw, field: String::new(), kind: IssueKind::Malformed }
}

/// `n` invalid documents cycling through the five failure kinds, each with
/// exactly one defect.
pub fn fuzz_corpus(seed: u64, n: usize) -> Vec<FuzzCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<GuidanceExecutables> = GuidanceExecutables::all_valid().collect();
    (0..n)
        .map(|i| {
            let mut doc = valid_value(bases.choose(&mut rng).expect("non-empty"));
            let obj = doc.as_object_mut().expect("object");
            match i % 5 {
                0 => {
                    // missing key, top level or nested
                    if rng.gen_bool(0.7) {
                        let key = *["e_max", "mu_0", "sigma_0", "bar_sigma", "assumptions", "rationale"]
                            .choose(&mut rng)
                            .unwrap();
                        obj.remove(key);
                        case(&doc, key, IssueKind::MissingKey)
                    } else {
                        let key = *["style", "road", "speed_kmh", "lane_quality"].choose(&mut rng).unwrap();
                        obj["assumptions"].as_object_mut().unwrap().remove(key);
                        case(&doc, &format!("assumptions.{key}"), IssueKind::MissingKey)
                    }
                }
                1 => {
                    let key = format!("extra_{}", rng.gen_range(0..1000));
                    if rng.gen_bool(0.5) {
                        obj.insert(key.clone(), json!(rng.gen_range(0.0..1.0)));
                        case(&doc, &key, IssueKind::UnknownKey)
                    } else {
                        obj["assumptions"].as_object_mut().unwrap().insert(key.clone(), json!("x"));
                        case(&doc, &format!("assumptions.{key}"), IssueKind::UnknownKey)
                    }
                }
                2 => match rng.gen_range(0..4) {
                    0 => {
                        let key = *NUMERIC.choose(&mut rng).unwrap();
                        let v = obj[key].clone();
                        obj[key] = json!(v.to_string());
                        case(&doc, key, IssueKind::TypeMismatch)
                    }
                    1 => {
                        let key = *ASSUMPTION_STRINGS.choose(&mut rng).unwrap();
                        obj["assumptions"][key] = json!(rng.gen_range(0..10));
                        case(&doc, &format!("assumptions.{key}"), IssueKind::TypeMismatch)
                    }
                    2 => {
                        obj["assumptions"] = json!([1, 2]);
                        case(&doc, "assumptions", IssueKind::TypeMismatch)
                    }
                    _ => {
                        obj["rationale"] = Value::Null;
                        case(&doc, "rationale", IssueKind::TypeMismatch)
                    }
                },
                3 => {
                    let key = *NUMERIC.choose(&mut rng).unwrap();
                    let off = [-1.0, 0.0, 0.1, 0.2, 0.7, 1.5, 4.0, 7.5, 20.0].choose(&mut rng).copied().unwrap();
                    obj[key] = json!(off);
                    case(&doc, key, IssueKind::OutOfSet)
                }
                _ => {
                    let text = doc.to_string();
                    malformed(match rng.gen_range(0..6) {
                        0 => text[..rng.gen_range(1..text.len() - 1)].to_string(),
                        1 => text.replacen('}', ",}", 1),
                        2 => text.replace('"', "'"),
                        3 => format!("[{text}]"),
                        4 => format!("Sure! Here are the settings: {text}"),
                        _ => json!(rng.gen_range(0.0..1.0)).to_string(),
                    })
                }
            }
        })
        .collect()
}

/// Batch posterior of Gaussian measurements: precisions add and the mean is
/// the precision-weighted average. Returns `(mean, variance)`.
pub fn closed_form(prior: &GaussianBelief, ys: &[f64], noise_variance: f64) -> (f64, f64) {
    let precision = 1.0 / prior.variance + ys.len() as f64 / noise_variance;
    let mean = (prior.mean / prior.variance + ys.iter().sum::<f64>() / noise_variance) / precision;
    (mean, 1.0 / precision)
}

/// Certificate settings for the toy walk; the candidate set reaches ±4 so a
/// jump toward the barrier can usually still be corrected.
pub fn toy_config(toy: &ToyWalk) -> PscConfig<f64> {
    PscConfig {
        epsilon: 0.1,
        gamma_gain: 1.0,
        dt: toy.dt,
        mc_samples: 1,
        inner_samples: 1,
        horizon: SafetyHorizon { steps: 4, dt_eval: toy.dt },
        candidates: vec![-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0],
    }
}

/// Toy beliefs from noisy drift measurements, starting from a wide prior.
pub fn toy_belief_path(seed: u64, len: usize) -> Vec<GaussianBelief> {
    let model = MeasurementModel { noise_variance: 0.2, clamp_lo: -5.0, clamp_hi: 5.0 };
    let mut rng = stream_rng(seed, family::MEASUREMENT, 0);
    let mut b = GaussianBelief::new(0.0, 0.09).unwrap();
    let mut out = vec![b];
    for _ in 1..len {
        b = b.update(model.sample(0.3, &mut rng), &model);
        out.push(b);
    }
    out
}
