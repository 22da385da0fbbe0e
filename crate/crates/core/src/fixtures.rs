//! Reference winner tables for regression testing of the tally arithmetic.
//!
//! The fixture CSV has the columns `image_pair,metric,ratio,winners`, where
//! `winners` joins rule letters with `&` (e.g. `C&R`). Each table covers two
//! images; within a pair, the first occurrence of a (metric, ratio) row
//! belongs to the first image and the second to the other.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::evalstat::{tally, EvalError, OccurrenceTally, WinnerSet};
use crate::rounding::{RoundingRule, DEFAULT_RULES};

/// Winner letters for ten images, four metrics and ratios 2 to 5.
pub const REFERENCE_WINNER_TABLES: &str = include_str!("../fixtures/winner_tables.csv");

/// Per-pair (floor, ceil, round) occurrence counts printed with each table.
pub const REFERENCE_PAIR_COUNTS: [(&str, [u64; 3]); 5] = [
    ("1&2", [7, 27, 10]),
    ("3&4", [6, 25, 12]),
    ("5&6", [7, 24, 11]),
    ("7&8", [9, 26, 12]),
    ("9&10", [7, 24, 11]),
];

/// Aggregate (floor, ceil, round) achieved occurrences and the targeted count.
pub const REFERENCE_TOTALS: ([u64; 3], u64) = ([36, 126, 56], 160);

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("fixture row {row}: {source}")]
    Winners { row: usize, source: EvalError },
    #[error("fixture row {row}: header must be image_pair,metric,ratio,winners")]
    Header { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRow {
    pub image_pair: String,
    pub metric: String,
    pub ratio: u32,
    pub winners: WinnerSet,
}

pub fn parse_winner_fixture(text: &str) -> Result<Vec<FixtureRow>, FixtureError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?;
    if headers.iter().collect::<Vec<_>>() != ["image_pair", "metric", "ratio", "winners"] {
        return Err(FixtureError::Header { row: 1 });
    }
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let row = i + 2;
            let ratio = rec[2].parse().map_err(|_| FixtureError::Winners {
                row,
                source: EvalError::InvalidWinnerSet(format!("bad ratio {:?}", &rec[2])),
            })?;
            let winners = rec[3]
                .parse()
                .map_err(|source| FixtureError::Winners { row, source })?;
            Ok(FixtureRow {
                image_pair: rec[0].to_string(),
                metric: rec[1].to_string(),
                ratio,
                winners,
            })
        })
        .collect()
}

/// Tallies the rows of each image pair separately, in first-seen order.
/// Each pair's targeted count is its row count.
pub fn tally_by_pair(
    rows: &[FixtureRow],
    rules: &[RoundingRule],
) -> Vec<(String, OccurrenceTally)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<WinnerSet>> = BTreeMap::new();
    for row in rows {
        if !groups.contains_key(row.image_pair.as_str()) {
            order.push(row.image_pair.clone());
        }
        groups
            .entry(row.image_pair.as_str())
            .or_default()
            .push(row.winners.clone());
    }
    order
        .into_iter()
        .map(|pair| {
            let sets = &groups[pair.as_str()];
            let t = tally(sets, rules, sets.len() as u64);
            (pair, t)
        })
        .collect()
}

/// Tallies all rows together against the default rule set.
pub fn tally_all(rows: &[FixtureRow]) -> OccurrenceTally {
    let sets: Vec<WinnerSet> = rows.iter().map(|r| r.winners.clone()).collect();
    tally(&sets, &DEFAULT_RULES, sets.len() as u64)
}
