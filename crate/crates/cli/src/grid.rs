//! Runs the full evaluation grid: images × ratios × rules × metrics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use log::{info, warn};
use nnround_core::metrics::score_native;
use nnround_core::nn_scale::resize_nn;
use nnround_core::raster::{crop, downsample_box, read_pnm_file, save_pnm};
use nnround_core::{
    lower_bound, tally, winners, CropRect, MetricKind, MoEResult, OccurrenceTally, PixelBuffer,
    PnmError, RasterError, RoundingRule, ScaleError, ScoreCase, WinnerSet,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, EvalConfig, FitPolicy, MetricPlan};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot load image {id} from {path}: {source}")]
    Load {
        id: String,
        path: PathBuf,
        source: PnmError,
    },
    #[error("image {id}: {source}")]
    Crop { id: String, source: RasterError },
    #[error("{width}x{height} is not divisible by ratio {ratio}; try crop = {suggested}")]
    NotDivisible {
        width: usize,
        height: usize,
        ratio: u32,
        suggested: CropRect,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Reference and downsampled source for one (image, ratio).
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub reference: PixelBuffer,
    pub source: PixelBuffer,
    /// Region of the loaded image used as the reference.
    pub crop: CropRect,
}

/// Crops the image (optional explicit crop first), fits the reference to a
/// multiple of `ratio`, and box-downsamples it by `ratio`.
pub fn prepare_case(
    image: &PixelBuffer,
    explicit_crop: Option<CropRect>,
    ratio: u32,
    fit: FitPolicy,
) -> Result<PreparedCase, GridError> {
    let base = explicit_crop.unwrap_or_else(|| CropRect::full(image));
    let r = ratio as usize;
    let (fw, fh) = (base.width - base.width % r, base.height - base.height % r);
    if fw == 0 || fh == 0 {
        return Err(RasterError::NotDivisible {
            width: base.width,
            height: base.height,
            factor: r,
        }
        .into());
    }
    let fitted = base.compose(&CropRect::new(1, 1, fw, fh));
    if fitted != base && fit == FitPolicy::Strict {
        return Err(GridError::NotDivisible {
            width: base.width,
            height: base.height,
            ratio,
            suggested: fitted,
        });
    }
    let reference = crop(image, fitted)?;
    let source = downsample_box(&reference, r)?;
    Ok(PreparedCase {
        reference,
        source,
        crop: fitted,
    })
}

/// One scored (or failed) grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub image_id: String,
    pub ratio: u32,
    pub metric: String,
    pub rule: RoundingRule,
    pub score: Option<f64>,
    pub winner: bool,
}

/// A cell left unscored, or a case left unranked.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub image_id: String,
    pub ratio: u32,
    pub metric: String,
    pub rule: Option<RoundingRule>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EvaluatedCase {
    pub case: ScoreCase,
    pub winners: Option<WinnerSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceInfo {
    pub image_id: String,
    pub ratio: u32,
    pub crop: CropRect,
    pub source_width: usize,
    pub source_height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub moe: MoEResult,
    /// Per rule: (achieved fraction, lower bound).
    pub bounds: Vec<(RoundingRule, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub image_ids: Vec<String>,
    pub ratios: Vec<u32>,
    pub metrics: Vec<String>,
    pub rules: Vec<RoundingRule>,
    pub references: Vec<ReferenceInfo>,
    pub records: Vec<CaseRecord>,
    pub cases: Vec<EvaluatedCase>,
    pub tally: OccurrenceTally,
    pub projections: Vec<Projection>,
    pub exclusions: Vec<Exclusion>,
}

impl GridOutcome {
    pub fn case(&self, image_id: &str, ratio: u32, metric: &str) -> Option<&EvaluatedCase> {
        self.cases.iter().find(|c| {
            c.case.image_id == image_id && c.case.ratio == ratio && c.case.metric.name() == metric
        })
    }
}

struct Unit {
    image: usize,
    ratio: usize,
    rule: usize,
}

type CellResult = Result<f64, String>;

fn score_unit(
    prepared: &PreparedCase,
    rule: RoundingRule,
    metrics: &[MetricPlan],
) -> Result<Vec<CellResult>, GridError> {
    let reference = &prepared.reference;
    let upscaled = resize_nn(
        &prepared.source,
        reference.width() as u32,
        reference.height() as u32,
        rule,
    )?;
    let mut temp: Option<tempfile::NamedTempFile> = None;
    let mut out = Vec::with_capacity(metrics.len());
    for plan in metrics {
        let result = match plan {
            MetricPlan::Native(id) => {
                debug_assert_eq!(id.kind(), MetricKind::FullReference);
                score_native(id, reference, &upscaled)
                    .expect("native metric")
                    .map_err(|e| e.to_string())
            }
            MetricPlan::External(scorer) => {
                if temp.is_none() {
                    match write_temp(&upscaled) {
                        Ok(file) => temp = Some(file),
                        Err(e) => warn!("cannot write temporary image: {e}"),
                    }
                }
                match &temp {
                    Some(file) => scorer
                        .score(file.path())
                        .map_err(|e| format!("{}: {e}", e.category())),
                    None => Err("scorer-io: temporary image unavailable".to_string()),
                }
            }
        };
        out.push(result);
    }
    Ok(out)
}

fn write_temp(img: &PixelBuffer) -> std::io::Result<tempfile::NamedTempFile> {
    use std::io::Write;
    let suffix = if img.channels() == 1 { ".pgm" } else { ".ppm" };
    let mut file = tempfile::Builder::new()
        .prefix("nnround-")
        .suffix(suffix)
        .tempfile()?;
    file.write_all(&save_pnm(img))?;
    file.flush()?;
    Ok(file)
}

/// Runs every grid cell, ranks the cases, and computes the tally and
/// margin-of-error projections.
///
/// Scorer failures only void their own cells. Image loading and geometry
/// failures abort the run.
pub fn run_grid(config: &EvalConfig) -> Result<GridOutcome, GridError> {
    config.validate()?;

    let mut images = Vec::with_capacity(config.images.len());
    for spec in &config.images {
        let img = read_pnm_file(&spec.path).map_err(|source| GridError::Load {
            id: spec.id.clone(),
            path: spec.path.clone(),
            source,
        })?;
        if let Some(rect) = spec.crop {
            if !rect.fits(img.width(), img.height()) {
                return Err(GridError::Crop {
                    id: spec.id.clone(),
                    source: RasterError::CropOutOfBounds {
                        rect,
                        width: img.width(),
                        height: img.height(),
                    },
                });
            }
        }
        images.push(img);
    }

    let mut prepared: Vec<Vec<PreparedCase>> = Vec::with_capacity(images.len());
    let mut references = Vec::new();
    for (spec, img) in config.images.iter().zip(&images) {
        let mut per_ratio = Vec::with_capacity(config.ratios.len());
        for &ratio in &config.ratios {
            let p = prepare_case(img, spec.crop, ratio, config.fit)?;
            references.push(ReferenceInfo {
                image_id: spec.id.clone(),
                ratio,
                crop: p.crop,
                source_width: p.source.width(),
                source_height: p.source.height(),
            });
            per_ratio.push(p);
        }
        prepared.push(per_ratio);
    }
    drop(images);

    let units: Vec<Unit> = (0..config.images.len())
        .flat_map(|image| {
            (0..config.ratios.len()).flat_map(move |ratio| {
                (0..config.rules.len()).map(move |rule| Unit { image, ratio, rule })
            })
        })
        .collect();
    info!(
        "scoring {} upscales with {} metric(s) on {} thread(s)",
        units.len(),
        config.metrics.len(),
        config.jobs
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    let scored: Vec<Vec<CellResult>> = pool.install(|| {
        units
            .par_iter()
            .map(|u| {
                score_unit(
                    &prepared[u.image][u.ratio],
                    config.rules[u.rule],
                    &config.metrics,
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // scores[(image, ratio, metric)][rule]
    let mut cells: BTreeMap<(usize, usize, usize), Vec<CellResult>> = BTreeMap::new();
    for (u, results) in units.iter().zip(scored) {
        for (m, result) in results.into_iter().enumerate() {
            cells.entry((u.image, u.ratio, m)).or_default().push(result);
        }
    }

    let mut records = Vec::new();
    let mut cases = Vec::new();
    let mut exclusions = Vec::new();
    for ((i, r, m), results) in cells {
        let image_id = &config.images[i].id;
        let ratio = config.ratios[r];
        let metric = config.metrics[m].id();
        let mut case = ScoreCase::new(image_id.clone(), ratio, metric.clone());
        for (&rule, result) in config.rules.iter().zip(&results) {
            match result {
                Ok(score) => {
                    case.scores.insert(rule, *score);
                }
                Err(reason) => {
                    warn!("{image_id} ratio {ratio} {metric} {rule}: excluded ({reason})");
                    exclusions.push(Exclusion {
                        image_id: image_id.clone(),
                        ratio,
                        metric: metric.name().to_string(),
                        rule: Some(rule),
                        reason: reason.clone(),
                    });
                }
            }
        }
        let winner_set = match winners(&case, config.tie_epsilon) {
            Ok(w) => Some(w),
            Err(e) => {
                warn!("{image_id} ratio {ratio} {metric}: not ranked ({e})");
                exclusions.push(Exclusion {
                    image_id: image_id.clone(),
                    ratio,
                    metric: metric.name().to_string(),
                    rule: None,
                    reason: e.to_string(),
                });
                None
            }
        };
        for &rule in &config.rules {
            records.push(CaseRecord {
                image_id: image_id.clone(),
                ratio,
                metric: metric.name().to_string(),
                rule,
                score: case.scores.get(&rule).copied(),
                winner: winner_set.as_ref().is_some_and(|w| w.contains(rule)),
            });
        }
        cases.push(EvaluatedCase {
            case,
            winners: winner_set,
        });
    }

    let winner_sets: Vec<WinnerSet> = cases.iter().filter_map(|c| c.winners.clone()).collect();
    let tally = tally(&winner_sets, &config.rules, winner_sets.len() as u64);
    let projections = project(config, &tally);

    Ok(GridOutcome {
        image_ids: config.images.iter().map(|i| i.id.clone()).collect(),
        ratios: config.ratios.clone(),
        metrics: config
            .metrics
            .iter()
            .map(|m| m.id().name().to_string())
            .collect(),
        rules: config.rules.clone(),
        references,
        records,
        cases,
        tally,
        projections,
        exclusions,
    })
}

fn project(config: &EvalConfig, tally: &OccurrenceTally) -> Vec<Projection> {
    let n = tally.targeted();
    if n == 0 {
        warn!("no rankable cases; skipping margin-of-error projections");
        return Vec::new();
    }
    config
        .projection_populations
        .iter()
        .filter_map(|&population| {
            match MoEResult::compute(n, population, config.proportion, config.z) {
                Ok(moe) => {
                    let bounds = config
                        .rules
                        .iter()
                        .map(|&rule| {
                            let p = tally.achieved(rule) as f64 / n as f64;
                            (rule, p, lower_bound(p, moe.margin))
                        })
                        .collect();
                    Some(Projection { moe, bounds })
                }
                Err(e) => {
                    warn!("skipping projection onto {population}: {e}");
                    None
                }
            }
        })
        .collect()
}
