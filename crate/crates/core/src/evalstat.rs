//! Winner determination, occurrence tallies and margin-of-error projection.
//!
//! A *case* is one (image, ratio, metric) cell scored under every evaluated
//! rounding rule. Its winner set holds every rule whose score is within
//! `tie_epsilon` of the best; ties count once for each member. A rule's
//! *targeted* occurrences are the number of rankable cases, and its
//! *achieved* occurrences are the cases whose winner set contains it.
//!
//! Proportions and margins are plain fractions in `[0, 1]`;
//! [`format_percent`] renders them for reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::MetricId;
use crate::rounding::RoundingRule;

/// Two-sided standard normal quantile for 95% confidence.
pub const Z_95: f64 = 1.96;

/// Maximum-variance proportion used when none is configured.
pub const DEFAULT_PROPORTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("case {0} has fewer than two scored rules")]
    NotRankable(String),
    #[error("case {case} has a non-finite score for {rule}")]
    NonFiniteScore { case: String, rule: RoundingRule },
    #[error("tie epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("targeted occurrence count is zero")]
    ZeroTargeted,
    #[error("invalid margin-of-error input: {0}")]
    InvalidMoeInput(String),
    #[error("invalid winner set {0:?}")]
    InvalidWinnerSet(String),
}

/// Scores for one (image, ratio, metric) cell; rules without a score are
/// absent from `scores`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCase {
    pub image_id: String,
    pub ratio: u32,
    pub metric: MetricId,
    pub scores: BTreeMap<RoundingRule, f64>,
}

impl ScoreCase {
    pub fn new(image_id: impl Into<String>, ratio: u32, metric: MetricId) -> Self {
        Self {
            image_id: image_id.into(),
            ratio,
            metric,
            scores: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, rule: RoundingRule, score: f64) -> Self {
        self.scores.insert(rule, score);
        self
    }

    pub fn is_rankable(&self) -> bool {
        self.scores.len() >= 2
    }

    fn label(&self) -> String {
        format!("{}/{}/ratio {}", self.image_id, self.metric, self.ratio)
    }
}

/// Non-empty set of winning rules, displayed in rule order as `F & C & R`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WinnerSet(BTreeSet<RoundingRule>);

impl WinnerSet {
    pub fn new(rules: impl IntoIterator<Item = RoundingRule>) -> Result<Self, EvalError> {
        let set: BTreeSet<_> = rules.into_iter().collect();
        if set.is_empty() {
            return Err(EvalError::InvalidWinnerSet(String::new()));
        }
        Ok(Self(set))
    }

    pub fn contains(&self, rule: RoundingRule) -> bool {
        self.0.contains(&rule)
    }

    pub fn rules(&self) -> impl Iterator<Item = RoundingRule> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for WinnerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rule) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{}", rule.letter())?;
        }
        Ok(())
    }
}

impl FromStr for WinnerSet {
    type Err = EvalError;

    /// Accepts letters joined by `&`, with or without surrounding spaces.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::InvalidWinnerSet(s.to_string());
        let rules = s
            .split('&')
            .map(|part| {
                let mut chars = part.trim().chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => RoundingRule::from_letter(c).ok_or_else(bad),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        WinnerSet::new(rules).map_err(|_| bad())
    }
}

/// Rules whose score is within `tie_epsilon` (absolute) of the best score
/// under the case metric's polarity.
pub fn winners(case: &ScoreCase, tie_epsilon: f64) -> Result<WinnerSet, EvalError> {
    if !(tie_epsilon >= 0.0 && tie_epsilon.is_finite()) {
        return Err(EvalError::InvalidEpsilon(tie_epsilon));
    }
    if !case.is_rankable() {
        return Err(EvalError::NotRankable(case.label()));
    }
    if let Some((&rule, _)) = case.scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore {
            case: case.label(),
            rule,
        });
    }
    let polarity = case.metric.polarity();
    let best = case
        .scores
        .values()
        .copied()
        .min_by(|a, b| polarity.compare(*a, *b))
        .expect("rankable case has scores");
    WinnerSet::new(
        case.scores
            .iter()
            .filter(|(_, &s)| polarity.shortfall(best, s) <= tie_epsilon)
            .map(|(&r, _)| r),
    )
}

/// Achieved occurrences per rule against a common targeted count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceTally {
    achieved: BTreeMap<RoundingRule, u64>,
    targeted: u64,
}

impl OccurrenceTally {
    pub fn achieved(&self, rule: RoundingRule) -> u64 {
        self.achieved.get(&rule).copied().unwrap_or(0)
    }

    pub fn targeted(&self) -> u64 {
        self.targeted
    }

    pub fn rules(&self) -> impl Iterator<Item = RoundingRule> + '_ {
        self.achieved.keys().copied()
    }

    /// Rules ordered by achieved count, most first; ties keep rule order.
    pub fn ranked(&self) -> Vec<(RoundingRule, u64)> {
        let mut v: Vec<_> = self.achieved.iter().map(|(&r, &n)| (r, n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Counts, for each rule in `rules`, the winner sets that contain it.
/// Members outside `rules` are ignored.
pub fn tally(cases: &[WinnerSet], rules: &[RoundingRule], targeted: u64) -> OccurrenceTally {
    let achieved = rules
        .iter()
        .map(|&rule| {
            (
                rule,
                cases.iter().filter(|w| w.contains(rule)).count() as u64,
            )
        })
        .collect();
    OccurrenceTally { achieved, targeted }
}

/// Fraction of targeted occurrences that `rule` achieved.
pub fn achieved_percentage(tally: &OccurrenceTally, rule: RoundingRule) -> Result<f64, EvalError> {
    if tally.targeted == 0 {
        return Err(EvalError::ZeroTargeted);
    }
    Ok(tally.achieved(rule) as f64 / tally.targeted as f64)
}

/// Margin of error for a proportion with finite population correction:
/// `z * sqrt(p(1-p)/n) * sqrt((N-n)/(N-1))`, and 0 when `N = 1`.
pub fn margin_of_error(n: u64, population: u64, p: f64, z: f64) -> Result<f64, EvalError> {
    if n == 0 || n > population {
        return Err(EvalError::InvalidMoeInput(format!(
            "sample size {n} must be in 1..={population}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(EvalError::InvalidMoeInput(format!(
            "proportion {p} outside [0, 1]"
        )));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(EvalError::InvalidMoeInput(format!(
            "z {z} must be positive"
        )));
    }
    if population == 1 {
        return Ok(0.0);
    }
    let (n, big_n) = (n as f64, population as f64);
    let standard_error = (p * (1.0 - p) / n).sqrt();
    let fpc = ((big_n - n) / (big_n - 1.0)).sqrt();
    Ok(z * standard_error * fpc)
}

/// A margin-of-error projection onto a population of `population`
/// occurrences from a sample of `sample_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoEResult {
    pub sample_size: u64,
    pub population: u64,
    pub proportion: f64,
    pub z: f64,
    pub margin: f64,
}

impl MoEResult {
    pub fn compute(
        sample_size: u64,
        population: u64,
        proportion: f64,
        z: f64,
    ) -> Result<Self, EvalError> {
        let margin = margin_of_error(sample_size, population, proportion, z)?;
        Ok(Self {
            sample_size,
            population,
            proportion,
            z,
            margin,
        })
    }
}

/// `p_hat - margin`, clamped at 0.
pub fn lower_bound(p_hat: f64, margin: f64) -> f64 {
    (p_hat - margin).max(0.0)
}

/// Renders a fraction as a percentage with at most two decimals and no
/// trailing zeros: `0.7875` → `78.75%`, `0.35` → `35%`.
pub fn format_percent(fraction: f64) -> String {
    let fixed = format!("{:.2}", fraction * 100.0);
    let trimmed = fixed.trim_end_matches('0').trim_end_matches('.');
    let trimmed = if trimmed == "-0" { "0" } else { trimmed };
    format!("{trimmed}%")
}
