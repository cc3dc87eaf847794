//! Scenario files: everything a run needs except the seed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::belief::{BeliefError, GaussianBelief, MeasurementModel};
use crate::certificate::{CertificateError, PscConfig, SafeSetSpec, SafetyHorizon};
use crate::control::{ControllerKind, LaneKeeping, MpcConfig, NominalConfig};
use crate::rng::{family, stream_rng};
use crate::vehicle::{
    ActuatorBounds, Integrator, NoiseSpec, RoadProfile, VehicleError, VehicleParams, VehicleState, VehicleWorld,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Road-surface classes with their friction ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoadClass {
    Icy,
    Wet,
    Dry,
}

impl RoadClass {
    pub const ALL: [RoadClass; 3] = [RoadClass::Icy, RoadClass::Wet, RoadClass::Dry];

    pub fn mu_range(self) -> (f64, f64) {
        match self {
            RoadClass::Icy => (0.2, 0.4),
            RoadClass::Wet => (0.4, 0.7),
            RoadClass::Dry => (0.7, 0.9),
        }
    }

    /// The tighter ranges used for the language-guided runs.
    pub fn narrow_range(self) -> (f64, f64) {
        match self {
            RoadClass::Icy => (0.3, 0.4),
            RoadClass::Wet => (0.5, 0.6),
            RoadClass::Dry => (0.8, 0.9),
        }
    }

    /// Class whose prior mean the guidance layer uses for a friction value.
    pub fn nearest(mu: f64) -> Self {
        if mu < 0.4 {
            RoadClass::Icy
        } else if mu < 0.7 {
            RoadClass::Wet
        } else {
            RoadClass::Dry
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoadClass::Icy => "icy",
            RoadClass::Wet => "wet",
            RoadClass::Dry => "dry",
        }
    }
}

impl std::str::FromStr for RoadClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "icy" => Ok(RoadClass::Icy),
            "wet" => Ok(RoadClass::Wet),
            "dry" => Ok(RoadClass::Dry),
            other => Err(format!("unknown road class `{other}`")),
        }
    }
}

/// True friction of the plant, drawn once per run uniformly from `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSpec {
    pub lo: f64,
    pub hi: f64,
}

impl FrictionSpec {
    pub fn class(class: RoadClass) -> Self {
        let (lo, hi) = class.mu_range();
        Self { lo, hi }
    }

    pub fn narrow(class: RoadClass) -> Self {
        let (lo, hi) = class.narrow_range();
        Self { lo, hi }
    }

    pub fn draw(&self, seed: u64) -> f64 {
        use rand::Rng;
        if self.lo == self.hi {
            return self.lo;
        }
        stream_rng(seed, family::FRICTION, 0).gen_range(self.lo..=self.hi)
    }
}

/// Prior belief as mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub mean: f64,
    pub std: f64,
}

/// Friction sensor: the noise the estimator assumes and the noise it gets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSpec {
    /// Standard deviation σ̄ assumed by the estimator.
    pub assumed_std: f64,
    /// Standard deviation of the simulated sensor; defaults to `assumed_std`.
    pub sensor_std: Option<f64>,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        let m = MeasurementModel::default();
        Self { assumed_std: m.noise_variance.sqrt(), sensor_std: None, clamp_lo: m.clamp_lo, clamp_hi: m.clamp_hi }
    }
}

impl MeasurementSpec {
    pub fn assumed(&self) -> MeasurementModel {
        MeasurementModel {
            noise_variance: self.assumed_std * self.assumed_std,
            clamp_lo: self.clamp_lo,
            clamp_hi: self.clamp_hi,
        }
    }

    pub fn sensor(&self) -> MeasurementModel {
        let s = self.sensor_std.unwrap_or(self.assumed_std);
        MeasurementModel { noise_variance: s * s, ..self.assumed() }
    }
}

/// Certificate settings; the candidate set is the actuator grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PscSettings {
    pub epsilon: f64,
    pub gamma_gain: f64,
    pub mc_samples: usize,
    pub inner_samples: usize,
    pub horizon: SafetyHorizon,
    pub steer_levels: usize,
    pub torque_levels: usize,
    /// Longest integration substep inside safety rollouts (s).
    pub rollout_substep: f64,
}

impl Default for PscSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            gamma_gain: 1.0,
            mc_samples: 100,
            inner_samples: 16,
            horizon: SafetyHorizon::default(),
            steer_levels: 7,
            torque_levels: 5,
            rollout_substep: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub controller: ControllerKind,
    /// Update the belief online; `false` freezes it at the prior.
    pub adaptive: bool,
    /// Control interval Δt (s).
    pub dt: f64,
    /// Episode time limit (s).
    pub max_time: f64,
    /// Initial forward speed (m/s).
    pub initial_speed: f64,
    pub friction: FrictionSpec,
    pub prior: PriorSpec,
    pub measurement: MeasurementSpec,
    pub safe_set: SafeSetSpec,
    pub psc: PscSettings,
    pub nominal: NominalConfig,
    pub mpc: MpcConfig,
    pub bounds: ActuatorBounds,
    pub params: VehicleParams,
    pub road: RoadProfile,
    pub noise: NoiseSpec,
    pub integrator: Integrator,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "icy-curve".into(),
            controller: ControllerKind::ApscFilter,
            adaptive: true,
            dt: 0.2,
            max_time: 60.0,
            initial_speed: 20.0 / 3.6,
            friction: FrictionSpec::class(RoadClass::Icy),
            prior: PriorSpec { mean: 0.3, std: 0.1 },
            measurement: MeasurementSpec::default(),
            safe_set: SafeSetSpec::default(),
            psc: PscSettings::default(),
            nominal: NominalConfig::default(),
            mpc: MpcConfig::default(),
            bounds: ActuatorBounds::default(),
            params: VehicleParams::default(),
            road: RoadProfile::default(),
            noise: NoiseSpec::default(),
            integrator: Integrator::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a `.toml` or `.json` scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.world().validate()?;
        self.prior_belief()?;
        self.measurement.assumed().validate()?;
        self.measurement.sensor().validate()?;
        SafeSetSpec::new(self.safe_set.e_max)?;
        self.psc_config().validate()?;
        let invalid = |m: &str| Err(ScenarioError::Invalid(m.into()));
        if !(self.dt > 0.0 && self.max_time > 0.0) {
            return invalid("dt and max_time must be positive");
        }
        if !(self.initial_speed > self.integrator.speed_floor) {
            return invalid("initial speed must exceed the speed floor");
        }
        if !(self.friction.lo > 0.0 && self.friction.lo <= self.friction.hi) {
            return invalid("friction range must satisfy 0 < lo <= hi");
        }
        if !(self.psc.rollout_substep > 0.0) {
            return invalid("rollout_substep must be positive");
        }
        self.mpc.validate().map_err(ScenarioError::Invalid)?;
        Ok(())
    }

    pub fn with_class(mut self, class: RoadClass) -> Self {
        self.friction = FrictionSpec::class(class);
        self
    }

    /// Changes the noise the estimator assumes while keeping the simulated
    /// sensor as it was.
    pub fn with_estimator_std(mut self, std: f64) -> Self {
        self.measurement.sensor_std = Some(self.measurement.sensor_std.unwrap_or(self.measurement.assumed_std));
        self.measurement.assumed_std = std;
        self
    }

    /// The plant.
    pub fn world(&self) -> VehicleWorld {
        VehicleWorld { params: self.params, road: self.road.clone(), noise: self.noise, integrator: self.integrator }
    }

    /// The closed loop used inside safety rollouts.
    pub fn rollout_system(&self) -> LaneKeeping {
        let mut world = self.world();
        world.integrator.max_substep = self.psc.rollout_substep;
        LaneKeeping {
            world,
            nominal: self.nominal,
            bounds: self.bounds,
            safe_set: self.safe_set,
            mu_range: (self.measurement.clamp_lo, self.measurement.clamp_hi),
        }
    }

    pub fn psc_config(&self) -> PscConfig {
        PscConfig {
            epsilon: self.psc.epsilon,
            gamma_gain: self.psc.gamma_gain,
            dt: self.dt,
            mc_samples: self.psc.mc_samples,
            inner_samples: self.psc.inner_samples,
            horizon: self.psc.horizon,
            candidates: self.bounds.grid(self.psc.steer_levels, self.psc.torque_levels),
        }
    }

    pub fn prior_belief(&self) -> Result<GaussianBelief, BeliefError> {
        GaussianBelief::from_std(self.prior.mean, self.prior.std)
    }

    pub fn initial_state(&self) -> VehicleState {
        VehicleState::cruising(self.initial_speed, &self.params)
    }

    /// Canonical JSON: keys sorted, so the text (and hash) does not depend on field order.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
