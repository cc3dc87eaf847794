//! Deterministic stand-in for a chat model, driven by keyword rules that
//! follow the system prompt's stated policy.

use crate::scenario::RoadClass;

use super::backend::{BackendError, ChatBackend, ChatRequest, Role};
use super::executables::{Assumptions, GuidanceExecutables};
use super::prompts::{FEEDBACK_HEADER, JSON_ONLY_REMINDER, TASK_HEADER, USER_HEADER};
use super::session::RunDigest;

const AGGRESSIVE: &[&str] = &[
    "aggressive",
    "aggressively",
    "fast",
    "faster",
    "sporty",
    "hurry",
    "rush",
    "push it",
    "quick",
    "quickly",
    "speed up",
    "race",
];
const CONSERVATIVE: &[&str] = &[
    "conservative",
    "careful",
    "carefully",
    "cautious",
    "cautiously",
    "smooth",
    "smoother",
    "gentle",
    "slow",
    "slower",
    "safe",
    "safely",
    "relaxed",
    "comfortable",
    "precise",
    "steady",
];
const ICY: &[&str] = &["icy", "ice", "snow", "snowy", "frozen", "frost", "frosty", "slippery"];
const WET: &[&str] = &["wet", "rain", "rainy", "damp", "puddles", "slushy", "normal"];
const DRY: &[&str] = &["dry", "sunny", "grippy"];
const HEDGE: &[&str] =
    &["seems", "seem", "maybe", "not sure", "probably", "perhaps", "might", "i think", "i guess", "unsure", "possibly"];
const SENSING: &[&str] = &[
    "fog",
    "foggy",
    "rain",
    "rainy",
    "snowing",
    "glare",
    "low light",
    "dark",
    "night",
    "sensor fault",
    "sensor",
    "visibility",
];
const POOR_LANES: &[&str] = &["faded", "worn", "unmarked", "poor lane", "poor lanes", "no lane"];

/// Mean prior friction the guidance layer uses for each class.
pub fn class_prior(class: RoadClass) -> f64 {
    match class {
        RoadClass::Icy => 0.3,
        RoadClass::Wet => 0.5,
        RoadClass::Dry => 0.9,
    }
}

/// `phrase` occurs in `text` delimited by non-alphanumeric characters.
/// Both are expected lowercase.
fn mentions(text: &str, phrase: &str) -> bool {
    text.match_indices(phrase).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + phrase.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

fn any(text: &str, words: &[&str]) -> bool {
    words.iter().any(|w| mentions(text, w))
}

fn stated_classes(text: &str) -> Vec<RoadClass> {
    [(RoadClass::Icy, ICY), (RoadClass::Wet, WET), (RoadClass::Dry, DRY)]
        .into_iter()
        .filter(|(_, words)| any(text, words))
        .map(|(c, _)| c)
        .collect()
}

fn speed_kmh(text: &str) -> f64 {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    for (i, tok) in tokens.iter().enumerate() {
        let (num, unit) = match tok.find(|c: char| !(c.is_ascii_digit() || c == '.')) {
            Some(0) => continue,
            Some(j) => (&tok[..j], &tok[j..]),
            None => (*tok, tokens.get(i + 1).copied().unwrap_or("")),
        };
        if ["km/h", "kmh", "kph"].iter().any(|u| unit.starts_with(u)) {
            if let Ok(v) = num.parse() {
                return v;
            }
        }
    }
    0.0
}

/// What the rules read from one request.
#[derive(Debug, Clone, PartialEq)]
struct Context {
    instruction: String,
    digest: Option<RunDigest>,
}

fn section<'a>(text: &'a str, header: &str, next: &str) -> Option<&'a str> {
    let start = text.find(header)? + header.len();
    let end = text[start..].find(next).map_or(text.len(), |j| start + j);
    Some(text[start..end].trim())
}

fn context(request: &ChatRequest) -> Context {
    let reasoning = request.system.starts_with(FEEDBACK_HEADER);
    let digest = reasoning
        .then(|| section(&request.system, FEEDBACK_HEADER, USER_HEADER))
        .flatten()
        .and_then(|block| block.lines().rev().find_map(|l| serde_json::from_str::<RunDigest>(l.trim()).ok()));
    let instruction = if reasoning {
        section(&request.system, USER_HEADER, TASK_HEADER).unwrap_or_default().to_string()
    } else {
        request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User && m.content != JSON_ONLY_REMINDER)
            .map(|m| m.content.clone())
            .unwrap_or_default()
    };
    Context { instruction, digest }
}

fn plan(ctx: &Context) -> GuidanceExecutables {
    let text = ctx.instruction.to_lowercase();
    let mut why = Vec::new();

    let conservative = any(&text, CONSERVATIVE);
    let aggressive = any(&text, AGGRESSIVE);
    let (e_max, style) = if conservative {
        why.push("the user asks for a conservative ride, so the error tolerance is tight".to_string());
        (3.0, "conservative")
    } else if aggressive {
        why.push("the user asks for an aggressive ride, so the error tolerance is wide".to_string());
        (10.0, "aggressive")
    } else if let Some(d) = &ctx.digest {
        why.push("no driving-style cue, so e_max is kept from the last run".to_string());
        (d.e_max, "unchanged")
    } else {
        why.push("no driving-style cue, so e_max stays at the middle value".to_string());
        (5.0, "neutral")
    };

    let stated = stated_classes(&text);
    let hedged = any(&text, HEDGE);
    let (mu_0, mut sigma_0, road) = match &ctx.digest {
        Some(d) => {
            let data = RoadClass::nearest(d.posterior_mean);
            why.push(format!(
                "the last posterior {:.2} points to {} road",
                d.posterior_mean,
                with_article(data.name())
            ));
            let contradicted = stated.iter().any(|c| *c != data);
            if contradicted {
                why.push("the stated road condition contradicts the measured friction, so the data wins and the prior is widened".into());
            }
            (class_prior(data), if contradicted { 0.3 } else { 0.05 }, data)
        }
        None => match stated.first() {
            Some(&c) => {
                why.push(format!("the user describes {} road", with_article(c.name())));
                (class_prior(c), if stated.len() > 1 { 0.3 } else { 0.05 }, c)
            }
            None => {
                why.push("no road cue, so a medium friction prior is assumed with a wide spread".into());
                (class_prior(RoadClass::Wet), 0.3, RoadClass::Wet)
            }
        },
    };
    if hedged {
        why.push("the user sounds unsure about the road".into());
        sigma_0 = 0.3;
    }
    let bar_sigma = if any(&text, SENSING) {
        why.push("sensing conditions are degraded, so measurements are trusted less".into());
        0.3
    } else {
        0.05
    };

    GuidanceExecutables {
        e_max,
        mu_0,
        sigma_0,
        bar_sigma,
        assumptions: Assumptions {
            style: style.into(),
            road: road.name().into(),
            speed_kmh: speed_kmh(&text),
            lane_quality: if any(&text, POOR_LANES) { "poor" } else { "unknown" }.into(),
        },
        rationale: why.join("; ") + ".",
    }
}

/// Keyword-rule backend; identical requests give identical replies.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl ChatBackend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        Ok(plan(&context(request)).to_json())
    }
}

fn with_article(word: &str) -> String {
    let article = if word.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    format!("{article} {word}")
}
