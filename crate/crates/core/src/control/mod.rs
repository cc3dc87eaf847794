//! Controllers: the nominal lane keeper, the certified safety filter, the
//! candidate-set MPC (with and without the certificate) and the episode loop.

mod episode;
mod filter;
mod mpc;
mod nominal;
mod system;

pub use episode::{run_episode, step_seed};
pub use filter::{certified_choice, deviation_cost, safe_filter, CertifiedStep};
pub use mpc::{mpc_plan, MpcConfig, MpcPlan};
pub use nominal::{
    cornering_stiffness, derive_lateral_gains, discretize, lateral_model, nominal, LqrWeights, NominalConfig,
    LATERAL_GAINS, REFERENCE_SPEED, SPEED_GAIN, TORQUE_DAMPING,
};
pub use system::LaneKeeping;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Nominal,
    /// Nominal controller behind the certified minimal-deviation filter.
    #[default]
    ApscFilter,
    /// Adaptive MPC with the belief mean in its model, no certificate.
    Ampc,
    /// Adaptive MPC whose first input must pass the certificate.
    ApscMpc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] =
        [ControllerKind::Nominal, ControllerKind::ApscFilter, ControllerKind::Ampc, ControllerKind::ApscMpc];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Nominal => "nominal",
            ControllerKind::ApscFilter => "apsc-filter",
            ControllerKind::Ampc => "ampc",
            ControllerKind::ApscMpc => "apsc-mpc",
        }
    }

    pub fn is_certified(self) -> bool {
        matches!(self, ControllerKind::ApscFilter | ControllerKind::ApscMpc)
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown controller `{s}` (expected nominal, apsc-filter, ampc or apsc-mpc)"))
    }
}
