use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::certificate::SafeSetSpec;
use crate::scenario::{PriorSpec, Scenario};

pub const E_MAX_SET: [f64; 3] = [3.0, 5.0, 10.0];
pub const MU_0_SET: [f64; 3] = [0.3, 0.5, 0.9];
pub const SIGMA_0_SET: [f64; 2] = [0.05, 0.3];
pub const BAR_SIGMA_SET: [f64; 2] = [0.05, 0.3];

/// What the model believes about the situation; stored, not used by the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Assumptions {
    pub style: String,
    pub road: String,
    pub speed_kmh: f64,
    pub lane_quality: String,
}

/// Controller settings produced by one planning turn.
///
/// `sigma_0` and `bar_sigma` are standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceExecutables {
    pub e_max: f64,
    pub mu_0: f64,
    pub sigma_0: f64,
    pub bar_sigma: f64,
    pub assumptions: Assumptions,
    pub rationale: String,
}

impl GuidanceExecutables {
    /// `base` with the safe set, prior and estimator noise replaced. The
    /// simulated sensor is left unchanged.
    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone().with_estimator_std(self.bar_sigma);
        s.safe_set = SafeSetSpec { e_max: self.e_max };
        s.prior = PriorSpec { mean: self.mu_0, std: self.sigma_0 };
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("executables serialize")
    }

    /// Every valid combination of the discrete fields (36 of them).
    pub fn all_valid() -> impl Iterator<Item = GuidanceExecutables> {
        E_MAX_SET.into_iter().flat_map(|e_max| {
            MU_0_SET.into_iter().flat_map(move |mu_0| {
                SIGMA_0_SET.into_iter().flat_map(move |sigma_0| {
                    BAR_SIGMA_SET.into_iter().map(move |bar_sigma| GuidanceExecutables {
                        e_max,
                        mu_0,
                        sigma_0,
                        bar_sigma,
                        assumptions: Assumptions::default(),
                        rationale: String::new(),
                    })
                })
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    /// Not parseable as JSON, or not an object.
    Malformed,
    MissingKey,
    UnknownKey,
    TypeMismatch,
    OutOfSet,
}

impl IssueKind {
    pub fn code(self) -> &'static str {
        match self {
            IssueKind::Malformed => "malformed",
            IssueKind::MissingKey => "missing-key",
            IssueKind::UnknownKey => "unknown-key",
            IssueKind::TypeMismatch => "type-mismatch",
            IssueKind::OutOfSet => "out-of-set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldIssue {
    /// Dotted path such as `assumptions.road`; empty for the whole document.
    pub field: String,
    pub kind: IssueKind,
    pub detail: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = if self.field.is_empty() { "<document>" } else { &self.field };
        write!(f, "{field}: {} ({})", self.kind.code(), self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("invalid executables: {}", issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub issues: Vec<FieldIssue>,
}

impl ValidationError {
    pub fn is_malformed(&self) -> bool {
        self.issues.iter().any(|i| i.kind == IssueKind::Malformed)
    }

    pub fn has(&self, field: &str, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.field == field && i.kind == kind)
    }
}

const TOP_KEYS: [&str; 6] = ["e_max", "mu_0", "sigma_0", "bar_sigma", "assumptions", "rationale"];
const ASSUMPTION_KEYS: [&str; 4] = ["style", "road", "speed_kmh", "lane_quality"];

struct Checker {
    issues: Vec<FieldIssue>,
}

impl Checker {
    fn push(&mut self, field: &str, kind: IssueKind, detail: impl Into<String>) {
        self.issues.push(FieldIssue { field: field.into(), kind, detail: detail.into() });
    }

    fn unknown(&mut self, obj: &Map<String, Value>, allowed: &[&str], prefix: &str) {
        for key in obj.keys().filter(|k| !allowed.contains(&k.as_str())) {
            self.push(&format!("{prefix}{key}"), IssueKind::UnknownKey, "not part of the schema");
        }
    }

    fn get<'v>(&mut self, obj: &'v Map<String, Value>, key: &str, field: &str) -> Option<&'v Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.push(field, IssueKind::MissingKey, "required");
        }
        v
    }

    fn number(&mut self, obj: &Map<String, Value>, key: &str, field: &str) -> Option<f64> {
        match self.get(obj, key, field)? {
            Value::Number(n) => n.as_f64(),
            other => {
                self.push(field, IssueKind::TypeMismatch, format!("expected a number, got {}", kind_of(other)));
                None
            }
        }
    }

    fn member(&mut self, obj: &Map<String, Value>, key: &str, allowed: &[f64]) -> Option<f64> {
        let v = self.number(obj, key, key)?;
        match allowed.iter().find(|a| (**a - v).abs() < 1e-9) {
            Some(a) => Some(*a),
            None => {
                let set = allowed.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
                self.push(key, IssueKind::OutOfSet, format!("{v} not in {{{set}}}"));
                None
            }
        }
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str, field: &str) -> Option<String> {
        match self.get(obj, key, field)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.push(field, IssueKind::TypeMismatch, format!("expected a string, got {}", kind_of(other)));
                None
            }
        }
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Parses and checks a STRICT JSON executables document.
///
/// All problems are reported at once, each against its field.
pub fn validate_executables(raw: &str) -> Result<GuidanceExecutables, ValidationError> {
    let malformed = |detail: String| ValidationError {
        issues: vec![FieldIssue { field: String::new(), kind: IssueKind::Malformed, detail }],
    };
    let value: Value = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed(format!("expected a JSON object, got {}", kind_of(&value))));
    };

    let mut c = Checker { issues: Vec::new() };
    c.unknown(&obj, &TOP_KEYS, "");
    let e_max = c.member(&obj, "e_max", &E_MAX_SET);
    let mu_0 = c.member(&obj, "mu_0", &MU_0_SET);
    let sigma_0 = c.member(&obj, "sigma_0", &SIGMA_0_SET);
    let bar_sigma = c.member(&obj, "bar_sigma", &BAR_SIGMA_SET);
    let rationale = c.string(&obj, "rationale", "rationale");
    let assumptions = match c.get(&obj, "assumptions", "assumptions") {
        Some(Value::Object(a)) => {
            c.unknown(a, &ASSUMPTION_KEYS, "assumptions.");
            let style = c.string(a, "style", "assumptions.style");
            let road = c.string(a, "road", "assumptions.road");
            let speed_kmh = c.number(a, "speed_kmh", "assumptions.speed_kmh");
            let lane_quality = c.string(a, "lane_quality", "assumptions.lane_quality");
            match (style, road, speed_kmh, lane_quality) {
                (Some(style), Some(road), Some(speed_kmh), Some(lane_quality)) => {
                    Some(Assumptions { style, road, speed_kmh, lane_quality })
                }
                _ => None,
            }
        }
        Some(other) => {
            let got = kind_of(other);
            c.push("assumptions", IssueKind::TypeMismatch, format!("expected an object, got {got}"));
            None
        }
        None => None,
    };

    match (e_max, mu_0, sigma_0, bar_sigma, assumptions, rationale) {
        (Some(e_max), Some(mu_0), Some(sigma_0), Some(bar_sigma), Some(assumptions), Some(rationale))
            if c.issues.is_empty() =>
        {
            Ok(GuidanceExecutables { e_max, mu_0, sigma_0, bar_sigma, assumptions, rationale })
        }
        _ => Err(ValidationError { issues: c.issues }),
    }
}
