use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::tree::{DecisionTree, Node};
use super::{Dataset, MiningError};
use crate::features::{Feature, FeatureVector};
use crate::formats::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }

    fn is_upper(self) -> bool {
        matches!(self, Comparator::Lt | Comparator::Le)
    }
}

/// `feature <cmp> value`. A condition on an absent feature is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub feature: Feature,
    pub cmp: Comparator,
    pub value: f64,
}

impl Condition {
    pub fn new(feature: Feature, cmp: Comparator, value: f64) -> Self {
        Self { feature, cmp, value }
    }

    pub fn holds(&self, fv: &FeatureVector) -> bool {
        self.feature.value(fv).is_some_and(|v| self.cmp.holds(v, self.value))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.feature, self.cmp.as_str(), self.value)
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let pos = s.find(['<', '>']).ok_or_else(|| format!("no comparator in '{s}'"))?;
        let (name, rest) = s.split_at(pos);
        let (cmp, value) = if let Some(v) = rest.strip_prefix("<=") {
            (Comparator::Le, v)
        } else if let Some(v) = rest.strip_prefix(">=") {
            (Comparator::Ge, v)
        } else if let Some(v) = rest.strip_prefix('<') {
            (Comparator::Lt, v)
        } else {
            (Comparator::Gt, &rest[1..])
        };
        let feature: Feature = name.trim().parse()?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad threshold '{}' in '{s}'", value.trim()))?;
        Ok(Self { feature, cmp, value })
    }
}

/// A conjunction of conditions predicting one format.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub format: Format,
    pub conditions: Vec<Condition>,
    /// Laplace-smoothed confidence used for selection.
    pub confidence: f64,
    pub support: usize,
    /// Unsmoothed correct/support ratio, when known.
    pub raw_confidence: Option<f64>,
}

impl Rule {
    pub fn new(format: Format, conditions: Vec<Condition>, confidence: f64) -> Self {
        Self {
            format,
            conditions,
            confidence,
            support: 0,
            raw_confidence: None,
        }
    }

    /// True when every condition holds; an empty rule always matches.
    pub fn matches(&self, fv: &FeatureVector) -> bool {
        self.conditions.iter().all(|c| c.holds(fv))
    }

    /// Whether every condition can be evaluated at this rule's stage.
    pub fn is_staged(&self) -> bool {
        self.conditions.iter().all(|c| c.feature.available_for(self.format))
    }

    /// Recomputes support and confidence by matching against `dataset`.
    pub fn rescore(&mut self, dataset: &Dataset) {
        let mut support = 0;
        let mut correct = 0;
        for s in &dataset.samples {
            if self.matches(&s.features) {
                support += 1;
                if s.accepts(self.format) {
                    correct += 1;
                }
            }
        }
        self.support = support;
        self.confidence = (correct as f64 + 1.0) / (support as f64 + 2.0);
        self.raw_confidence = (support > 0).then(|| correct as f64 / support as f64);
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RULE {} conf={} support={}", self.format, self.confidence, self.support)?;
        if let Some(raw) = self.raw_confidence {
            write!(f, " raw={raw}")?;
        }
        f.write_str(": ")?;
        if self.conditions.is_empty() {
            return f.write_str("TRUE");
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Hand-written rules from inspecting per-format winners. The minimum
/// diagonal count is expressed as `ndiags<25`; irregular matrices fall through
/// to the CSR default.
pub const OBSERVATION_RULES: &str = "\
RULESET v1
meta confidence_threshold=0.8
meta default=CSR
meta source=observation
RULE DIA conf=0.95 support=0: ndiags<25
RULE DIA conf=0.9 support=0: er_dia>0.6
RULE DIA conf=0.85 support=0: ntdiags_ratio>0.4
RULE ELL conf=0.9 support=0: max_rd<5 && er_ell>0.9 && var_rd<0.5
RULE COO conf=0.85 support=0: r>=1 && r<4
RULE CSR conf=0.6 support=0: TRUE
";

/// Ordered rules plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub meta: BTreeMap<String, String>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Self {
        let mut meta = BTreeMap::new();
        meta.insert("default".to_string(), Format::Csr.to_string());
        Self { rules, meta }
    }

    pub fn observation_rules() -> Self {
        OBSERVATION_RULES.parse().expect("built-in rules parse")
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    /// Format used when no rule is confident; CSR unless set in metadata.
    pub fn default_format(&self) -> Format {
        self.meta
            .get("default")
            .and_then(|d| d.parse().ok())
            .unwrap_or(Format::Csr)
    }

    pub fn confidence_threshold(&self) -> Option<f64> {
        self.meta.get("confidence_threshold").and_then(|v| v.parse().ok())
    }

    /// The rules that predict `format`, in stored order.
    pub fn group(&self, format: Format) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.format == format)
    }

    /// Format of the highest-confidence matching rule (first on ties).
    pub fn vote(&self, fv: &FeatureVector) -> Option<Format> {
        let mut best: Option<&Rule> = None;
        for r in &self.rules {
            if r.matches(fv) && best.is_none_or(|b| r.confidence > b.confidence) {
                best = Some(r);
            }
        }
        best.map(|r| r.format)
    }

    /// [`RuleSet::vote`], falling back to the default format.
    pub fn classify(&self, fv: &FeatureVector) -> Format {
        self.vote(fv).unwrap_or_else(|| self.default_format())
    }

    /// Fraction of samples whose classification is not co-best.
    pub fn error_rate(&self, dataset: &Dataset) -> f64 {
        if dataset.is_empty() {
            return 0.0;
        }
        let wrong = dataset
            .samples
            .iter()
            .filter(|s| !s.accepts(self.classify(&s.features)))
            .count();
        wrong as f64 / dataset.len() as f64
    }

    /// Groups rules DIA, ELL, CSR, COO; within a group by descending
    /// confidence, keeping the original order on ties.
    pub fn regroup(&mut self) {
        self.rules.sort_by(|a, b| {
            a.format
                .index()
                .cmp(&b.format.index())
                .then(b.confidence.total_cmp(&a.confidence))
        });
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, MiningError> {
        text.parse()
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RULESET v1")?;
        for (k, v) in &self.meta {
            writeln!(f, "meta {k}={v}")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn parse_rule(body: &str) -> Result<Rule, String> {
    let (head, conds) = body.split_once(':').ok_or("missing ':' after rule header")?;
    let mut tokens = head.split_whitespace();
    let format: Format = tokens
        .next()
        .ok_or("missing format")?
        .parse()
        .map_err(|e: crate::formats::FormatError| e.to_string())?;
    let mut confidence = None;
    let mut support = 0;
    let mut raw_confidence = None;
    for t in tokens {
        let (k, v) = t.split_once('=').ok_or_else(|| format!("bad token '{t}'"))?;
        let num = || v.parse::<f64>().map_err(|_| format!("bad number '{v}' for {k}"));
        match k {
            "conf" => confidence = Some(num()?),
            "support" => support = v.parse().map_err(|_| format!("bad support '{v}'"))?,
            "raw" => raw_confidence = Some(num()?),
            _ => return Err(format!("unknown key '{k}'")),
        }
    }
    let confidence = confidence.ok_or("missing conf=")?;
    let conds = conds.trim();
    let conditions = if conds == "TRUE" {
        Vec::new()
    } else {
        conds.split("&&").map(str::parse).collect::<Result<_, _>>()?
    };
    Ok(Rule {
        format,
        conditions,
        confidence,
        support,
        raw_confidence,
    })
}

impl FromStr for RuleSet {
    type Err = MiningError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "RULESET v1")) => {}
            Some((line, other)) => {
                return Err(MiningError::Parse {
                    line,
                    reason: format!("expected 'RULESET v1', found '{other}'"),
                })
            }
            None => {
                return Err(MiningError::Parse {
                    line: 1,
                    reason: "empty rule set".into(),
                })
            }
        }
        let mut set = RuleSet::default();
        for (line, l) in lines {
            let bad = |reason: String| MiningError::Parse { line, reason };
            if let Some(kv) = l.strip_prefix("meta ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("meta needs key=value".into()))?;
                set.meta.insert(k.trim().to_string(), v.trim().to_string());
            } else if let Some(body) = l.strip_prefix("RULE ") {
                set.rules.push(parse_rule(body).map_err(bad)?);
            } else {
                return Err(bad(format!("unrecognized line '{l}'")));
            }
        }
        if let Some(d) = set.meta.get("default") {
            d.parse::<Format>()
                .map_err(|e| MiningError::Parse { line: 0, reason: e.to_string() })?;
        }
        Ok(set)
    }
}

/// Collapses repeated bounds on one feature to the tightest pair.
fn simplify(conditions: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::new();
    for c in conditions {
        let existing = out
            .iter_mut()
            .find(|o| o.feature == c.feature && o.cmp.is_upper() == c.cmp.is_upper());
        match existing {
            None => out.push(*c),
            Some(o) => {
                let tighter = if c.cmp.is_upper() {
                    c.value < o.value || (c.value == o.value && c.cmp == Comparator::Lt)
                } else {
                    c.value > o.value || (c.value == o.value && c.cmp == Comparator::Gt)
                };
                if tighter {
                    *o = *c;
                }
            }
        }
    }
    out
}

/// One rule per leaf path, scored against `dataset`.
///
/// Conditions on features that are not yet extracted when the rule's format
/// group runs are dropped. Rules that end up matching nothing, and exact
/// duplicates, are removed.
pub fn tree_to_rules(tree: &DecisionTree, dataset: &Dataset) -> RuleSet {
    fn walk(node: &Node, path: &mut Vec<Condition>, out: &mut Vec<Rule>) {
        match node {
            Node::Leaf { class, .. } => out.push(Rule::new(*class, simplify(path), 0.0)),
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                path.push(Condition::new(*feature, Comparator::Le, *threshold));
                walk(left, path, out);
                path.pop();
                path.push(Condition::new(*feature, Comparator::Gt, *threshold));
                walk(right, path, out);
                path.pop();
            }
        }
    }
    let mut raw = Vec::new();
    walk(&tree.root, &mut Vec::new(), &mut raw);
    let mut rules: Vec<Rule> = Vec::new();
    for mut r in raw {
        r.conditions.retain(|c| c.feature.available_for(r.format));
        r.rescore(dataset);
        if r.support == 0 {
            continue;
        }
        if rules.iter().any(|o| o.format == r.format && o.conditions == r.conditions) {
            continue;
        }
        rules.push(r);
    }
    let mut set = RuleSet::new(rules);
    set.set_meta("training_size", dataset.len());
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::{train_tree, TrainingSample, TreeParams};

    #[test]
    fn observation_rules_parse() {
        let set = RuleSet::observation_rules();
        assert_eq!(set.rules.len(), 6);
        assert_eq!(set.default_format(), Format::Csr);
        assert_eq!(set.confidence_threshold(), Some(0.8));
        assert_eq!(set.rules[3].conditions.len(), 3);
        assert!(set.rules[5].conditions.is_empty());
        assert!(set.rules.iter().all(Rule::is_staged));
    }

    #[test]
    fn text_round_trip() {
        let mut set = RuleSet::observation_rules();
        set.rules[0].raw_confidence = Some(0.123456789);
        set.rules[1].support = 17;
        let text = set.to_text();
        let back = RuleSet::parse(&text).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn condition_parsing() {
        let c: Condition = "var_rd <= 0.25".parse().unwrap();
        assert_eq!(c, Condition::new(Feature::VarRd, Comparator::Le, 0.25));
        let c: Condition = "R>=-1e3".parse().unwrap();
        assert_eq!(c, Condition::new(Feature::R, Comparator::Ge, -1000.0));
        assert!("bogus<1".parse::<Condition>().is_err());
        assert!("m=1".parse::<Condition>().is_err());
        assert!("m<x".parse::<Condition>().is_err());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = RuleSet::parse("RULESET v1\nRULE DIA support=3: m<1\n").unwrap_err();
        assert!(matches!(err, MiningError::Parse { line: 2, .. }));
        assert!(RuleSet::parse("RULESET v2\n").is_err());
        assert!(RuleSet::parse("RULESET v1\nmeta default=XYZ\n").is_err());
    }

    #[test]
    fn absent_feature_is_false() {
        let c = Condition::new(Feature::R, Comparator::Lt, 4.0);
        assert!(!c.holds(&FeatureVector::default()));
        let fv = FeatureVector {
            r: Some(2.0),
            ..FeatureVector::default()
        };
        assert!(c.holds(&fv));
    }

    #[test]
    fn classify_and_regroup() {
        let mut set = RuleSet::parse(
            "RULESET v1\nRULE COO conf=0.9 support=1: m>10\nRULE ELL conf=0.7 support=1: m>5\nRULE ELL conf=0.95 support=1: m>20\n",
        )
        .unwrap();
        let fv = |m| FeatureVector {
            m,
            ..FeatureVector::default()
        };
        assert_eq!(set.classify(&fv(30)), Format::Ell);
        assert_eq!(set.classify(&fv(15)), Format::Coo);
        assert_eq!(set.classify(&fv(1)), Format::Csr);
        set.regroup();
        let order: Vec<_> = set.rules.iter().map(|r| (r.format, r.confidence)).collect();
        assert_eq!(order, vec![(Format::Ell, 0.95), (Format::Ell, 0.7), (Format::Coo, 0.9)]);
    }

    #[test]
    fn simplify_keeps_tightest_bounds() {
        let m = |cmp, v| Condition::new(Feature::M, cmp, v);
        let out = simplify(&[m(Comparator::Le, 10.0), m(Comparator::Gt, 2.0), m(Comparator::Le, 5.0), m(Comparator::Gt, 1.0)]);
        assert_eq!(out, vec![m(Comparator::Le, 5.0), m(Comparator::Gt, 2.0)]);
    }

    #[test]
    fn tree_rules_drop_unstaged_conditions() {
        let mk = |r: f64, label| {
            let fv = FeatureVector {
                m: 100,
                r: Some(r),
                ..FeatureVector::default()
            };
            TrainingSample::labeled(fv, label)
        };
        let mut s: Vec<_> = (0..6).map(|i| mk(i as f64, Format::Dia)).collect();
        s.extend((10..16).map(|i| mk(i as f64, Format::Coo)));
        let ds = Dataset::new(s);
        let tree = train_tree(
            &ds,
            &TreeParams {
                min_leaf: 2,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let set = tree_to_rules(&tree, &ds);
        let dia = set.group(Format::Dia).next().unwrap();
        assert!(dia.conditions.is_empty(), "r is not available to the DIA group");
        assert_eq!(dia.support, 12);
        assert!((dia.confidence - 7.0 / 14.0).abs() < 1e-12);
        assert_eq!(dia.raw_confidence, Some(0.5));
        let coo = set.group(Format::Coo).next().unwrap();
        assert_eq!(coo.conditions, vec![Condition::new(Feature::R, Comparator::Gt, 7.5)]);
        assert_eq!(coo.support, 6);
        assert!((coo.confidence - 7.0 / 8.0).abs() < 1e-12);
    }
}
