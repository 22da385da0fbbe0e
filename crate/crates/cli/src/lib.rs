//! Configuration-driven benchmark runner for nearest-neighbor rounding rules.
//!
//! [`config`] reads the run description, [`grid`] scores every
//! (image, ratio, rule, metric) cell and ranks the cases, and [`report`]
//! writes the winner tables, tallies and projections.

pub mod config;
pub mod grid;
pub mod report;

use std::fmt::Write as _;

use nnround_core::fixtures::{
    parse_winner_fixture, tally_all, tally_by_pair, FixtureError, REFERENCE_PAIR_COUNTS,
    REFERENCE_TOTALS,
};
use nnround_core::{achieved_percentage, format_percent, RoundingRule, DEFAULT_RULES};
use thiserror::Error;

pub use config::{ConfigError, EvalConfig, FitPolicy, MetricPlan, Overrides};
pub use grid::{prepare_case, run_grid, CaseRecord, GridError, GridOutcome, PreparedCase};
pub use report::{emit_reports, ReportError};

/// Top-level failure, grouped into categories with distinct exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("fixture regression failed")]
    FixtureMismatch,
    #[error("{0}")]
    Image(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Grid(GridError::Load { .. }) => "io",
            CliError::Grid(_) => "grid",
            CliError::Report(_) => "report",
            CliError::Fixture(_) | CliError::FixtureMismatch => "fixture",
            CliError::Image(_) => "image",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "grid" => 4,
            "report" => 5,
            "fixture" => 6,
            _ => 1,
        }
    }
}

/// Result of replaying winner-letter tables through the tally code.
#[derive(Debug, Clone)]
pub struct FixtureCheck {
    pub lines: Vec<String>,
    pub passed: bool,
}

/// Tallies the winner fixture per image pair and in aggregate, and compares
/// against the reference counts when the fixture is the bundled one.
pub fn check_winner_fixture(text: &str, compare_reference: bool) -> Result<FixtureCheck, CliError> {
    let rows = parse_winner_fixture(text)?;
    let rules = DEFAULT_RULES;
    let mut lines = Vec::new();
    let mut passed = true;
    let letters = |counts: [u64; 3]| {
        rules
            .iter()
            .zip(counts)
            .map(|(r, n)| format!("{}={n}", r.letter()))
            .collect::<Vec<_>>()
            .join(" ")
    };

    for (pair, t) in tally_by_pair(&rows, &rules) {
        let got = rules.map(|r| t.achieved(r));
        let mut line = format!("pair {pair:<5} {} of {}", letters(got), t.targeted());
        if compare_reference {
            match REFERENCE_PAIR_COUNTS.iter().find(|(p, _)| *p == pair) {
                Some((_, want)) if *want == got => line.push_str("  ok"),
                Some((_, want)) => {
                    passed = false;
                    let _ = write!(line, "  MISMATCH (expected {})", letters(*want));
                }
                None => {
                    passed = false;
                    line.push_str("  MISMATCH (unexpected pair)");
                }
            }
        }
        lines.push(line);
    }

    let total = tally_all(&rows);
    let got = rules.map(|r| total.achieved(r));
    for rule in ranked(&rules, got) {
        let pct = achieved_percentage(&total, rule)
            .map(format_percent)
            .unwrap_or_else(|_| "n/a".into());
        lines.push(format!(
            "{},{}/{},{}",
            rule.name(),
            total.achieved(rule),
            total.targeted(),
            pct
        ));
    }
    if compare_reference && (got, total.targeted()) != REFERENCE_TOTALS {
        passed = false;
        lines.push(format!(
            "aggregate MISMATCH (expected {} of {})",
            letters(REFERENCE_TOTALS.0),
            REFERENCE_TOTALS.1
        ));
    }
    Ok(FixtureCheck { lines, passed })
}

fn ranked(rules: &[RoundingRule; 3], counts: [u64; 3]) -> Vec<RoundingRule> {
    let mut v: Vec<(RoundingRule, u64)> = rules.iter().copied().zip(counts).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(r, _)| r).collect()
}
