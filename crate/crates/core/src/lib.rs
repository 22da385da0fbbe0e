//! Nearest-neighbor image interpolation under pluggable rounding rules, with
//! the quality metrics and occurrence statistics needed to compare the rules.
//!
//! The pipeline for one test image is: crop and box-downsample a reference
//! ([`raster`]), upscale it back with [`nn_scale::resize_nn`] under each
//! [`RoundingRule`], score each result ([`metrics`], [`extscore`]), and
//! decide per-case winners and occurrence tallies ([`evalstat`]).

pub mod evalstat;
pub mod extscore;
pub mod fixtures;
pub mod metrics;
pub mod nn_scale;
pub mod raster;
pub mod rounding;

pub use evalstat::{
    achieved_percentage, format_percent, lower_bound, margin_of_error, tally, winners, EvalError,
    MoEResult, OccurrenceTally, ScoreCase, WinnerSet, Z_95,
};
pub use extscore::{score_external, ExternalScorer, ScorerError};
pub use metrics::{
    mse, rescale_series, ssim, MetricError, MetricId, MetricKind, Polarity, SsimParams,
};
pub use nn_scale::{
    build_index_map, map_coord, resize_nn, IndexEntry, IndexMap, ScaleError, ScalePair,
};
pub use raster::{
    crop, downsample_box, load_pnm, save_pnm, to_luma, CropRect, PixelBuffer, PnmError, RasterError,
};
pub use rounding::{round_value, RoundingError, RoundingRule, DEFAULT_RULES};
