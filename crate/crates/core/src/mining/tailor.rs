use super::{Dataset, Rule, RuleSet};
use crate::formats::Format;

/// Allowed error increase of the tailored prefix over the full rule list.
pub const DEFAULT_ACCURACY_GAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TailorReport {
    /// `errors[k]` is the training error using the first `k` ordered rules.
    pub errors: Vec<f64>,
    pub full_error: f64,
    /// Number of rules kept.
    pub kept: usize,
    /// Kept rules, regrouped by format.
    pub ruleset: RuleSet,
}

/// Smallest `k` whose error is within `gap` of the last entry.
pub fn shortest_acceptable_prefix(errors: &[f64], gap: f64) -> usize {
    let Some(&full) = errors.last() else {
        return 0;
    };
    errors
        .iter()
        .position(|&e| e <= full + gap + 1e-12)
        .unwrap_or(errors.len() - 1)
}

/// Per-sample state of the vote classifier over a growing rule subset. A
/// sample no rule matches counts as an error.
struct Votes<'a> {
    dataset: &'a Dataset,
    matches: Vec<Vec<bool>>,
    best: Vec<Option<(f64, Format)>>,
}

impl Votes<'_> {
    fn predicted(&self, s: usize) -> Option<Format> {
        self.best[s].map(|(_, f)| f)
    }

    fn correct(&self, s: usize, pred: Option<Format>) -> bool {
        pred.is_some_and(|f| self.dataset.samples[s].accepts(f))
    }

    fn wrong(&self) -> usize {
        (0..self.best.len()).filter(|&s| !self.correct(s, self.predicted(s))).count()
    }

    /// Errors after hypothetically adding `rule`.
    fn wrong_with(&self, r: usize, rule: &Rule) -> usize {
        (0..self.best.len())
            .filter(|&s| {
                let pred = if self.matches[r][s] && self.best[s].is_none_or(|(c, _)| rule.confidence > c) {
                    Some(rule.format)
                } else {
                    self.predicted(s)
                };
                !self.correct(s, pred)
            })
            .count()
    }

    fn add(&mut self, r: usize, rule: &Rule) {
        for s in 0..self.best.len() {
            if self.matches[r][s] && self.best[s].is_none_or(|(c, _)| rule.confidence > c) {
                self.best[s] = Some((rule.confidence, rule.format));
            }
        }
    }
}

/// Greedily orders rules by error reduction, then keeps the shortest prefix
/// whose error stays within `gap` of the full list.
///
/// Errors are those of the highest-confidence vote with no default class:
/// an unmatched matrix goes to measurement at runtime, so no rule gets credit
/// for it.
pub fn tailor_rules(rules: &RuleSet, dataset: &Dataset, gap: f64) -> TailorReport {
    let n = dataset.len().max(1) as f64;
    let mut votes = Votes {
        dataset,
        matches: rules
            .rules
            .iter()
            .map(|r| dataset.samples.iter().map(|s| r.matches(&s.features)).collect())
            .collect(),
        best: vec![None; dataset.len()],
    };
    let mut remaining: Vec<usize> = (0..rules.rules.len()).collect();
    let mut order = Vec::new();
    let mut errors = vec![votes.wrong() as f64 / n];
    let mut current = votes.wrong();
    while !remaining.is_empty() {
        let mut pick: Option<(usize, usize)> = None;
        for (pos, &r) in remaining.iter().enumerate() {
            let w = votes.wrong_with(r, &rules.rules[r]);
            if pick.is_none_or(|(_, best)| w < best) {
                pick = Some((pos, w));
            }
        }
        let (pos, w) = pick.expect("non-empty");
        if w >= current {
            break;
        }
        let r = remaining.remove(pos);
        votes.add(r, &rules.rules[r]);
        order.push(r);
        current = w;
        errors.push(w as f64 / n);
    }
    // the rest do not help on training data; keep them after the useful ones
    for r in remaining {
        votes.add(r, &rules.rules[r]);
        order.push(r);
        errors.push(votes.wrong() as f64 / n);
    }

    let full_error = *errors.last().expect("at least one entry");
    let kept = shortest_acceptable_prefix(&errors, gap);
    let mut ruleset = RuleSet {
        rules: order[..kept].iter().map(|&r| rules.rules[r].clone()).collect(),
        meta: rules.meta.clone(),
    };
    ruleset.regroup();
    TailorReport {
        errors,
        full_error,
        kept,
        ruleset,
    }
}
