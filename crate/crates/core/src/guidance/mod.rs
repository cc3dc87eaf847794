//! Language guidance: turning instructions and past runs into validated
//! controller settings through a chat model.

mod backend;
mod executables;
mod mock;
pub mod prompts;
mod session;

pub use backend::{
    BackendError, ChatBackend, ChatMessage, ChatRequest, OpenAiCompatible, Role, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use executables::{
    validate_executables, Assumptions, FieldIssue, GuidanceExecutables, IssueKind, ValidationError, BAR_SIGMA_SET,
    E_MAX_SET, MU_0_SET, SIGMA_0_SET,
};
pub use mock::{class_prior, MockBackend};
pub use session::{
    compose_request, digest_run, guided_base, guided_turn, llm_plan, GuidanceError, GuidedTurn, Plan, PlanConfig,
    RunDigest, SessionState,
};
