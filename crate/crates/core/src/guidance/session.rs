use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{run_episode, ControllerKind};
use crate::runlog::RunLog;
use crate::scenario::{FrictionSpec, RoadClass, Scenario, ScenarioError};

use super::backend::{BackendError, ChatBackend, ChatMessage, ChatRequest};
use super::executables::{validate_executables, GuidanceExecutables, ValidationError};
use super::prompts::{reasoning_prompt, INFERENCE_PROMPT, JSON_ONLY_REMINDER, PROMPT_VERSION};

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("no valid JSON after {attempts} attempts: {last}")]
    Malformed { attempts: usize, last: ValidationError },
    #[error("executables rejected after {attempts} attempts: {last}")]
    Invalid { attempts: usize, last: ValidationError },
    #[error("run log has no steps")]
    EmptyRun,
    #[error("session out of order: {0}")]
    Session(String),
    #[error(transparent)]
    Run(#[from] ScenarioError),
}

/// Compact summary of one run, as fed back to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDigest {
    pub steps: usize,
    /// Mean and standard deviation of `|e|` (m).
    pub lateral_mean: f64,
    pub lateral_std: f64,
    /// Mean and standard deviation of `v_x` (m/s).
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Fraction of steps with `|e| < 3 m`.
    pub safety: f64,
    pub e_max: f64,
    pub prior_mean: f64,
    pub prior_std: f64,
    /// Belief at the last logged step.
    pub posterior_mean: f64,
    pub posterior_std: f64,
}

impl RunDigest {
    /// One-line JSON form used inside prompts.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("digest serializes")
    }

    /// Human-readable block in the Lateral / Speed / Safety / Prior / Posterior layout.
    pub fn to_text(&self) -> String {
        format!(
            "Lateral: {:.2} ± {:.2} m\nSpeed: {:.2} ± {:.2} m/s\nSafety: {:.0}%\nPrior: {:.2} ± {:.2}\nPosterior: {:.2} ± {:.2}\ne_max: {} m",
            self.lateral_mean,
            self.lateral_std,
            self.speed_mean,
            self.speed_std,
            100.0 * self.safety,
            self.prior_mean,
            self.prior_std,
            self.posterior_mean,
            self.posterior_std,
            self.e_max
        )
    }
}

pub fn digest_run(log: &RunLog) -> Result<RunDigest, GuidanceError> {
    let last = log.rows.last().ok_or(GuidanceError::EmptyRun)?;
    let m = log.metrics();
    Ok(RunDigest {
        steps: log.rows.len(),
        lateral_mean: m.mean_abs_e,
        lateral_std: m.std_abs_e,
        speed_mean: m.mean_vx,
        speed_std: m.std_vx,
        safety: m.empirical_safety,
        e_max: log.scenario.safe_set.e_max,
        prior_mean: log.meta.prior_mean,
        prior_std: log.meta.prior_std,
        posterior_mean: last.belief_mean,
        posterior_std: last.belief_var.sqrt(),
    })
}

/// Everything said and measured so far in one multi-turn session.
/// Histories only grow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub provider: String,
    pub prompt_version: String,
    pub instructions: Vec<String>,
    /// Raw model reply that produced each accepted executables record.
    pub replies: Vec<String>,
    pub executables: Vec<GuidanceExecutables>,
    pub digests: Vec<RunDigest>,
}

impl SessionState {
    pub fn new(provider: impl Into<String>) -> Self {
        Self {
            provider: provider.into(),
            prompt_version: PROMPT_VERSION.into(),
            instructions: Vec::new(),
            replies: Vec::new(),
            executables: Vec::new(),
            digests: Vec::new(),
        }
    }

    pub fn turns(&self) -> usize {
        self.instructions.len()
    }

    /// Appends an accepted plan. Every earlier plan must have its run digest.
    pub fn record_plan(&mut self, instruction: &str, plan: &Plan) -> Result<(), GuidanceError> {
        if self.digests.len() != self.instructions.len() {
            return Err(GuidanceError::Session("the previous plan has not been run".into()));
        }
        self.instructions.push(instruction.into());
        self.replies.push(plan.reply.clone());
        self.executables.push(plan.executables.clone());
        Ok(())
    }

    pub fn record_run(&mut self, digest: RunDigest) -> Result<(), GuidanceError> {
        if self.digests.len() + 1 != self.instructions.len() {
            return Err(GuidanceError::Session("no planned turn is waiting for a run".into()));
        }
        self.digests.push(digest);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Extra attempts after the first reply fails validation.
    pub max_retries: usize,
    /// Feed back every earlier run instead of only the last one.
    pub full_history: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { max_retries: 3, full_history: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub rationale: String,
    pub executables: GuidanceExecutables,
    pub reply: String,
    pub attempts: usize,
    pub request: ChatRequest,
}

/// The request for the next turn given the session so far.
///
/// The first turn sends the inference prompt and the instruction. Later
/// turns send the reasoning prompt, with the last run's digest (or all of
/// them) and the new instruction filled in, after the earlier exchanges.
pub fn compose_request(
    session: &SessionState,
    instruction: &str,
    cfg: &PlanConfig,
) -> Result<ChatRequest, GuidanceError> {
    if session.digests.len() != session.instructions.len() {
        return Err(GuidanceError::Session("the previous plan has not been run".into()));
    }
    let mut messages = Vec::with_capacity(2 * session.turns() + 1);
    for (i, r) in session.instructions.iter().zip(&session.replies) {
        messages.push(ChatMessage::user(i.clone()));
        messages.push(ChatMessage::assistant(r.clone()));
    }
    messages.push(ChatMessage::user(instruction));
    let system = match session.digests.last() {
        None => INFERENCE_PROMPT.to_string(),
        Some(last) => {
            let feedback = if cfg.full_history {
                session.digests.iter().map(RunDigest::to_line).collect::<Vec<_>>().join("\n")
            } else {
                last.to_line()
            };
            reasoning_prompt(&feedback, instruction)
        }
    };
    Ok(ChatRequest { system, messages })
}

/// Strips a surrounding Markdown code fence, which chat models often add.
fn unfence(reply: &str) -> &str {
    let t = reply.trim();
    t.strip_prefix("```")
        .and_then(|r| r.strip_suffix("```"))
        .map(|r| r.strip_prefix("json").unwrap_or(r).trim())
        .unwrap_or(t)
}

/// Asks the backend for the next executables and validates them, retrying
/// with a JSON-only reminder up to `cfg.max_retries` times.
pub fn llm_plan(
    session: &SessionState,
    instruction: &str,
    backend: &dyn ChatBackend,
    cfg: &PlanConfig,
) -> Result<Plan, GuidanceError> {
    let first = compose_request(session, instruction, cfg)?;
    let mut request = first.clone();
    let attempts = cfg.max_retries + 1;
    let mut last_err = None;
    for attempt in 1..=attempts {
        let reply = backend.complete(&request)?;
        match validate_executables(unfence(&reply)) {
            Ok(executables) => {
                return Ok(Plan {
                    rationale: executables.rationale.clone(),
                    executables,
                    reply,
                    attempts: attempt,
                    request: first,
                })
            }
            Err(e) => {
                request.messages.push(ChatMessage::assistant(reply));
                request.messages.push(ChatMessage::user(JSON_ONLY_REMINDER));
                last_err = Some(e);
            }
        }
    }
    let last = last_err.expect("at least one attempt");
    Err(if last.is_malformed() {
        GuidanceError::Malformed { attempts, last }
    } else {
        GuidanceError::Invalid { attempts, last }
    })
}

/// Base scenario for language-guided runs: the certified MPC on the narrow
/// friction range of `class`.
pub fn guided_base(class: RoadClass) -> Scenario {
    Scenario {
        name: format!("guided-{}", class.name()),
        controller: ControllerKind::ApscMpc,
        friction: FrictionSpec::narrow(class),
        ..Scenario::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedTurn {
    pub plan: Plan,
    pub scenario: Scenario,
    pub log: RunLog,
    pub digest: RunDigest,
}

/// One full outer-loop turn: plan, run with the planned settings, record.
/// The session is only modified once the run has succeeded.
pub fn guided_turn(
    session: &mut SessionState,
    instruction: &str,
    backend: &dyn ChatBackend,
    cfg: &PlanConfig,
    base: &Scenario,
    seed: u64,
) -> Result<GuidedTurn, GuidanceError> {
    let plan = llm_plan(session, instruction, backend, cfg)?;
    let scenario = plan.executables.apply(base);
    let log = run_episode(&scenario, seed)?;
    let digest = digest_run(&log)?;
    session.record_plan(instruction, &plan)?;
    session.record_run(digest.clone())?;
    Ok(GuidedTurn { plan, scenario, log, digest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::MockBackend;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        bad: usize,
        calls: AtomicUsize,
        reply: &'static str,
    }

    impl ChatBackend for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.bad {
                Ok("I think the answer is e_max=3".into())
            } else {
                MockBackend.complete(req).map(|r| if self.reply.is_empty() { r } else { self.reply.into() })
            }
        }
    }

    #[test]
    fn first_turn_uses_inference_prompt() {
        let s = SessionState::new("mock");
        let req = compose_request(&s, "icy road", &PlanConfig::default()).unwrap();
        assert_eq!(req.system, INFERENCE_PROMPT);
        assert_eq!(req.messages, vec![ChatMessage::user("icy road")]);
    }

    #[test]
    fn retries_then_succeeds() {
        let b = Flaky { bad: 3, calls: AtomicUsize::new(0), reply: "" };
        let plan = llm_plan(&SessionState::new("x"), "icy", &b, &PlanConfig::default()).unwrap();
        assert_eq!(plan.attempts, 4);
    }

    #[test]
    fn gives_up_after_retries() {
        let b = Flaky { bad: 10, calls: AtomicUsize::new(0), reply: "" };
        let err = llm_plan(&SessionState::new("x"), "icy", &b, &PlanConfig::default()).unwrap_err();
        assert!(matches!(err, GuidanceError::Malformed { attempts: 4, .. }));
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn invalid_values_are_not_forwarded() {
        let b = Flaky {
            bad: 0,
            calls: AtomicUsize::new(0),
            reply: r#"{"e_max":4,"mu_0":0.3,"sigma_0":0.05,"bar_sigma":0.05,"assumptions":{"style":"","road":"","speed_kmh":0,"lane_quality":""},"rationale":""}"#,
        };
        match llm_plan(&SessionState::new("x"), "icy", &b, &PlanConfig::default()) {
            Err(GuidanceError::Invalid { last, .. }) => {
                assert!(last.has("e_max", crate::guidance::IssueKind::OutOfSet))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fenced_reply_is_accepted() {
        let b = Flaky { bad: 0, calls: AtomicUsize::new(0), reply: "```json\n{\"e_max\":5,\"mu_0\":0.5,\"sigma_0\":0.3,\"bar_sigma\":0.05,\"assumptions\":{\"style\":\"\",\"road\":\"\",\"speed_kmh\":0,\"lane_quality\":\"\"},\"rationale\":\"r\"}\n```" };
        let plan = llm_plan(&SessionState::new("x"), "hi", &b, &PlanConfig::default()).unwrap();
        assert_eq!(plan.rationale, "r");
    }

    #[test]
    fn session_order_is_enforced() {
        let mut s = SessionState::new("mock");
        let plan = llm_plan(&s, "icy", &MockBackend, &PlanConfig::default()).unwrap();
        s.record_plan("icy", &plan).unwrap();
        assert!(matches!(s.record_plan("again", &plan), Err(GuidanceError::Session(_))));
        assert!(compose_request(&s, "next", &PlanConfig::default()).is_err());
    }
}
