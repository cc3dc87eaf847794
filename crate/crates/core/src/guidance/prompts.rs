//! System prompts, kept verbatim. Changing any text here must bump
//! [`PROMPT_VERSION`].

pub const PROMPT_VERSION: &str = "h1";

/// First turn: infer executables from the instruction alone.
pub const INFERENCE_PROMPT: &str = concat!(
    "You are an expert inferring initial controller priors from a short user preference.",
    " Return STRICT JSON with keys: e_max, mu_0, sigma_0, bar_sigma, assumptions, rationale.",
    " Meanings:",
    " - e_max: maximum lane tracking error tolerance. Larger for more aggressive turns/risk; smaller for more conservative/precise.",
    " - mu_0: initial prior for road-tire friction (icy small, normal medium, dry large).",
    " - sigma_0: uncertainty (std^2) of the friction prior; larger if the user sounds unsure or contradictory.",
    " - bar_sigma: confidence of the estimator on its measurements; increase if not sure if estimator is good.",
    " Policy:",
    " - If the user uses vague words (\"seems\", \"maybe\", \"not sure\", \"probably\"), pick the most likely road class they stated,",
    " - Only change e_max with explicit user cues.",
    " Valid discrete ranges:",
    " - e_max in {3,5,10}; mu_0 in {0.3,0.5,0.9}; sigma_0 in {0.05,0.3}; bar_sigma in {0.05,0.3}.",
    " Output ONLY JSON in this exact shape: ",
    " {\"e_max\":0,\"mu_0\":0.0,\"sigma_0\":0.0,\"bar_sigma\":0.0,\"assumptions\":{\"style\":\"\",\"road\":\"\",\"speed_kmh\":0,\"lane_quality\":\"\"},\"rationale\":\"\"} ",
    " Ensure values are from the allowed sets and remember these are initial priors, not ground truth."
);

pub const FEEDBACK_HEADER: &str = "=== Quantitative feedback from the last run ===\n";
pub const USER_HEADER: &str = "=== User feedback ===\n";
pub const TASK_HEADER: &str = "=== Your task ===\n";

/// Later turns: the task text that follows the feedback sections.
pub const REASONING_TASK: &str = concat!(
    "Based on both quantitative feedback and qualitative user feedback, infer new reasonable parameters.",
    "Return STRICT JSON with keys: e_max, mu_0, sigma_0, bar_sigma, assumptions, rationale.\n",
    " Meanings:",
    " - e_max: maximum lane tracking error tolerance. Larger for more aggressive turns/risk; smaller for more conservative/precise.",
    " - mu_0: initial prior for road-tire friction (icy small, normal medium, dry large).",
    " - sigma_0: uncertainty (std^2) of the friction prior; larger if the user sounds unsure or contradictory.",
    " - bar_sigma: confidence of the estimator on its measurements; increase if not sure if estimator is good. You should try to trust the estimator.",
    " Policy:",
    " - If the user uses vague words (\"seems\", \"maybe\", \"not sure\", \"probably\"), pick the most likely road class they stated,",
    " - Only change e_max with explicit user cues.",
    " Valid discrete ranges:",
    " - e_max in {3,5,10}; mu_0 in {0.3,0.5,0.9}; sigma_0 in {0.05,0.3}; bar_sigma in {0.05,0.3}.",
    " - Keep bar_sigma=0.05. Only set bar_sigma=0.3 if the text explicitly mentions sensing/visibility problems (fog/rain/snow/glare/low light/sensor fault) and explain why.\n",
    " - Keep sigma_0=0.05 and align mu_0 with previous estimation. Set sigma_0=0.3 and different mu_0 only if (a) the user hedges about the ROAD (\"seems/maybe/not sure/probably\"), or (b) the user statement contradicts quantitative feedback suggesting a different friction class; explain the uncertainty.\n",
    " Output ONLY JSON in this exact shape: ",
    " {\"e_max\":0,\"mu_0\":0.0,\"sigma_0\":0.0,\"bar_sigma\":0.0,\"assumptions\":{\"style\":\"\",\"road\":\"\",\"speed_kmh\":0,\"lane_quality\":\"\"},\"rationale\":\"\"} ",
    "Ensure values are from the allowed sets and remember these are initial priors, not ground truth.\n"
);

/// Appended after a reply that failed validation.
pub const JSON_ONLY_REMINDER: &str =
    "Your previous reply was not valid. Reply with JSON only, in the exact shape above, using values from the allowed sets.";

/// The reasoning prompt with its feedback sections filled in.
pub fn reasoning_prompt(feedback: &str, user_feedback: &str) -> String {
    format!("{FEEDBACK_HEADER}{feedback}\n{USER_HEADER}{user_feedback}\n{TASK_HEADER}{REASONING_TASK}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::validate_executables;

    fn sample_shape(prompt: &str) -> &str {
        let start = prompt.find("{\"e_max\"").unwrap();
        let end = prompt[start..].find("} ").unwrap() + start + 1;
        &prompt[start..end]
    }

    #[test]
    fn embedded_shape_parses_but_placeholders_are_out_of_set() {
        for p in [INFERENCE_PROMPT, REASONING_TASK] {
            let err = validate_executables(sample_shape(p)).unwrap_err();
            assert!(!err.is_malformed());
            assert_eq!(err.issues.len(), 4, "{err}");
        }
    }

    #[test]
    fn reasoning_prompt_orders_sections() {
        let p = reasoning_prompt("DIGEST", "USER");
        let (a, b, c) = (p.find("DIGEST").unwrap(), p.find("USER").unwrap(), p.find(TASK_HEADER).unwrap());
        assert!(p.starts_with(FEEDBACK_HEADER) && a < b && b < c);
        assert!(p.ends_with("not ground truth.\n"));
    }
}
