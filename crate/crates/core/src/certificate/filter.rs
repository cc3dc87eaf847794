use serde::{Deserialize, Serialize};

use super::ConstraintCheck;

/// Input picked from a finite candidate set under the certificate constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult<U> {
    pub input: U,
    /// Position of `input` in the candidate list.
    pub index: usize,
    pub feasible: bool,
    pub margin: f64,
    /// Objective value of the chosen input.
    pub cost: f64,
    /// Number of candidates whose constraint was evaluated.
    pub evaluated: usize,
}

/// Minimiser of `cost` over the candidates that pass `check`; ties go to
/// the larger margin, then the lower index. With no feasible candidate the
/// largest-margin one is returned with `feasible = false`.
///
/// Candidates are checked in order of increasing cost and the scan stops
/// after the first feasible cost level, so `check` (usually the expensive
/// part) runs only as often as needed.
pub fn select_input<U: Clone>(
    candidates: &[U],
    cost: impl Fn(&U) -> f64,
    mut check: impl FnMut(&U) -> ConstraintCheck,
) -> FilterResult<U> {
    assert!(!candidates.is_empty(), "candidate set must not be empty");
    let costs: Vec<f64> = candidates.iter().map(&cost).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

    let mut best_feasible: Option<(usize, f64)> = None;
    let mut best_any: Option<(usize, f64)> = None;
    let mut evaluated = 0;
    for &i in &order {
        if let Some((j, _)) = best_feasible {
            if costs[i] > costs[j] {
                break;
            }
        }
        let c = check(&candidates[i]);
        evaluated += 1;
        if best_any.is_none_or(|(j, m)| c.margin > m || (c.margin == m && i < j)) {
            best_any = Some((i, c.margin));
        }
        if c.satisfied && best_feasible.is_none_or(|(j, m)| c.margin > m || (c.margin == m && i < j)) {
            best_feasible = Some((i, c.margin));
        }
    }
    let (feasible, (index, margin)) = match best_feasible {
        Some(b) => (true, b),
        None => (false, best_any.expect("at least one candidate evaluated")),
    };
    FilterResult { input: candidates[index].clone(), index, feasible, margin, cost: costs[index], evaluated }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(margins: &[f64]) -> impl FnMut(&usize) -> ConstraintCheck + '_ {
        |&i| ConstraintCheck { satisfied: margins[i] >= 0.0, margin: margins[i] }
    }

    #[test]
    fn picks_only_feasible() {
        let cands = [0usize, 1, 2];
        let r = select_input(&cands, |&i| i as f64, check(&[-1.0, -0.5, 0.2]));
        assert_eq!((r.index, r.feasible), (2, true));
    }

    #[test]
    fn infeasible_returns_max_margin() {
        let cands = [0usize, 1, 2];
        let r = select_input(&cands, |&i| i as f64, check(&[-1.0, -0.1, -0.5]));
        assert_eq!((r.index, r.feasible, r.evaluated), (1, false, 3));
    }

    #[test]
    fn stops_after_first_feasible_level() {
        let cands = [0usize, 1, 2, 3];
        let r = select_input(&cands, |&i| [1.0, 0.0, 0.0, 2.0][i], check(&[0.3, -0.1, 0.4, 0.9]));
        assert_eq!((r.index, r.evaluated), (2, 2));
    }

    #[test]
    fn ties_prefer_margin_then_index() {
        let cands = [0usize, 1, 2];
        let r = select_input(&cands, |_| 1.0, check(&[0.1, 0.3, 0.3]));
        assert_eq!(r.index, 1);
    }
}
