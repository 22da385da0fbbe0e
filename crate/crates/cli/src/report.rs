//! Report files written after a grid run.
//!
//! | file                  | contents                                              |
//! |-----------------------|-------------------------------------------------------|
//! | `winners.md`          | winner-letter grids, two images per table             |
//! | `scores.csv`          | one row per (image, ratio, metric, rule) cell         |
//! | `tally.csv`           | achieved/targeted occurrences and percentage per rule |
//! | `projection.csv`      | margin of error per projected population              |
//! | `lower_bounds.csv`    | achieved percentage minus margin, per rule            |
//! | `series_rescaled.csv` | per (image, metric) scores mapped to plot intervals   |
//! | `references.csv`      | crop window and source size used per (image, ratio)   |
//! | `exclusions.csv`      | unscored cells and unranked cases with reasons        |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nnround_core::{format_percent, rescale_series, MetricId, RoundingRule};
use thiserror::Error;

use crate::grid::{CaseRecord, GridOutcome};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: the run produced no records")]
    NothingToReport,
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub const WINNERS_MD: &str = "winners.md";
pub const SCORES_CSV: &str = "scores.csv";
pub const TALLY_CSV: &str = "tally.csv";
pub const PROJECTION_CSV: &str = "projection.csv";
pub const LOWER_BOUNDS_CSV: &str = "lower_bounds.csv";
pub const SERIES_CSV: &str = "series_rescaled.csv";
pub const REFERENCES_CSV: &str = "references.csv";
pub const EXCLUSIONS_CSV: &str = "exclusions.csv";

/// Writes every report into `out_dir`, creating it if needed, and returns
/// the paths written.
pub fn emit_reports(outcome: &GridOutcome, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if outcome.records.is_empty() {
        return Err(ReportError::NothingToReport);
    }
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = [
        (WINNERS_MD, winners_markdown(outcome)),
        (SCORES_CSV, scores_csv(&outcome.records)?),
        (TALLY_CSV, tally_csv(outcome)?),
        (PROJECTION_CSV, projection_csv(outcome)?),
        (LOWER_BOUNDS_CSV, lower_bounds_csv(outcome)?),
        (SERIES_CSV, series_csv(outcome)?),
        (REFERENCES_CSV, references_csv(outcome)?),
        (EXCLUSIONS_CSV, exclusions_csv(outcome)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|source| ReportError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

fn csv_string(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_score(score: Option<f64>) -> String {
    score.map(|s| s.to_string()).unwrap_or_default()
}

pub fn scores_csv(records: &[CaseRecord]) -> Result<String, ReportError> {
    csv_string(
        &["image_id", "ratio", "metric", "rule", "score", "winner"],
        records.iter().map(|r| {
            vec![
                r.image_id.clone(),
                r.ratio.to_string(),
                r.metric.clone(),
                r.rule.name().to_string(),
                fmt_score(r.score),
                r.winner.to_string(),
            ]
        }),
    )
}

/// Rows like `ceil,126/160,78.75%`, most occurrences first.
pub fn tally_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    let t = &outcome.tally;
    csv_string(
        &["rounding_function", "achieved/targeted", "percentage"],
        t.ranked().into_iter().map(|(rule, achieved)| {
            let pct = if t.targeted() == 0 {
                String::new()
            } else {
                format_percent(achieved as f64 / t.targeted() as f64)
            };
            vec![
                rule.name().to_string(),
                format!("{achieved}/{}", t.targeted()),
                pct,
            ]
        }),
    )
}

/// Rows like `800,6.93%`.
pub fn projection_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    csv_string(
        &["targeted_occurrences", "margin_of_error"],
        outcome
            .projections
            .iter()
            .map(|p| vec![p.moe.population.to_string(), format_percent(p.moe.margin)]),
    )
}

pub fn lower_bounds_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    csv_string(
        &[
            "rounding_function",
            "targeted_occurrences",
            "achieved",
            "margin_of_error",
            "lower_bound",
        ],
        outcome.projections.iter().flat_map(|p| {
            p.bounds.iter().map(move |&(rule, achieved, bound)| {
                vec![
                    rule.name().to_string(),
                    p.moe.population.to_string(),
                    format_percent(achieved),
                    format_percent(p.moe.margin),
                    format_percent(bound),
                ]
            })
        }),
    )
}

/// Each (image, metric) series spans all ratios and rules, so one affine map
/// keeps every rule comparable within the series.
pub fn series_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    let mut groups: BTreeMap<(usize, usize), Vec<&CaseRecord>> = BTreeMap::new();
    for r in outcome.records.iter().filter(|r| r.score.is_some()) {
        let i = outcome.image_ids.iter().position(|id| *id == r.image_id);
        let m = outcome.metrics.iter().position(|m| *m == r.metric);
        if let (Some(i), Some(m)) = (i, m) {
            groups.entry((i, m)).or_default().push(r);
        }
    }
    let mut rows = Vec::new();
    for ((_, m), recs) in groups {
        let metric_name = &outcome.metrics[m];
        let (lo, hi) = metric_interval(metric_name);
        let values: Vec<f64> = recs.iter().map(|r| r.score.unwrap_or_default()).collect();
        let rescaled = match rescale_series(&values, lo, hi) {
            Ok(v) => v,
            Err(_) => continue,
        };
        for (r, v) in recs.iter().zip(rescaled) {
            rows.push(vec![
                r.image_id.clone(),
                r.metric.clone(),
                r.ratio.to_string(),
                r.rule.name().to_string(),
                fmt_score(r.score),
                v.to_string(),
            ]);
        }
    }
    csv_string(
        &["image_id", "metric", "ratio", "rule", "score", "rescaled"],
        rows,
    )
}

fn metric_interval(name: &str) -> (f64, f64) {
    MetricId::builtin(name)
        .map(|m| m.plot_interval())
        .unwrap_or((0.0, 1.0))
}

pub fn references_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    csv_string(
        &[
            "image_id",
            "ratio",
            "crop_left",
            "crop_top",
            "reference_width",
            "reference_height",
            "source_width",
            "source_height",
        ],
        outcome.references.iter().map(|r| {
            vec![
                r.image_id.clone(),
                r.ratio.to_string(),
                r.crop.left.to_string(),
                r.crop.top.to_string(),
                r.crop.width.to_string(),
                r.crop.height.to_string(),
                r.source_width.to_string(),
                r.source_height.to_string(),
            ]
        }),
    )
}

pub fn exclusions_csv(outcome: &GridOutcome) -> Result<String, ReportError> {
    csv_string(
        &["image_id", "ratio", "metric", "rule", "reason"],
        outcome.exclusions.iter().map(|e| {
            vec![
                e.image_id.clone(),
                e.ratio.to_string(),
                e.metric.clone(),
                e.rule.map(|r| r.name().to_string()).unwrap_or_default(),
                e.reason.clone(),
            ]
        }),
    )
}

/// Winner-letter grids with two images per table: one row per metric, one
/// column per ratio, the first image's ratios followed by the second's.
pub fn winners_markdown(outcome: &GridOutcome) -> String {
    let mut md = String::from("# Winning rounding functions\n\n");
    let legend: Vec<String> = outcome
        .rules
        .iter()
        .map(|r| format!("{} = {}", r.letter(), r.name()))
        .collect();
    let _ = writeln!(md, "Legend: {}.\n", legend.join(", "));

    for (t, pair) in outcome.image_ids.chunks(2).enumerate() {
        let counts = pair_counts(outcome, pair);
        let caption: Vec<String> = outcome
            .rules
            .iter()
            .map(|r| format!("{} = {} times", r.letter(), counts[r]))
            .collect();
        let _ = writeln!(md, "## Table {}: {}\n", t + 1, caption.join(", "));

        let mut header = vec![pair.join(" & ")];
        for _ in pair {
            header.extend(outcome.ratios.iter().map(|r| format!("ratio = {r}")));
        }
        let _ = writeln!(md, "| {} |", header.join(" | "));
        let _ = writeln!(md, "|{}", "---|".repeat(header.len()));
        for metric in &outcome.metrics {
            let mut row = vec![metric.clone()];
            for image in pair {
                for &ratio in &outcome.ratios {
                    let cell = outcome
                        .case(image, ratio, metric)
                        .and_then(|c| c.winners.as_ref())
                        .map(|w| w.to_string())
                        .unwrap_or_else(|| "n/a".to_string());
                    row.push(cell);
                }
            }
            let _ = writeln!(md, "| {} |", row.join(" | "));
        }
        md.push('\n');
    }
    md
}

fn pair_counts(outcome: &GridOutcome, pair: &[String]) -> BTreeMap<RoundingRule, u64> {
    let mut counts: BTreeMap<RoundingRule, u64> = outcome.rules.iter().map(|&r| (r, 0)).collect();
    for c in outcome
        .cases
        .iter()
        .filter(|c| pair.contains(&c.case.image_id))
    {
        if let Some(w) = &c.winners {
            for r in w.rules() {
                if let Some(n) = counts.get_mut(&r) {
                    *n += 1;
                }
            }
        }
    }
    counts
}
