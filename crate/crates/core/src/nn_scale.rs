//! Linear coordinate mapping, per-axis index maps and separable
//! nearest-neighbor resizing.
//!
//! Coordinates are 1-based throughout: destination coordinate `d` maps to
//! the raw source coordinate `d * src_len / dest_len`, which is rounded by a
//! [`RoundingRule`] and clamped into `1..=src_len`. The 0-based offset is
//! taken only when samples are gathered.

use std::fmt::Write as _;

use thiserror::Error;

use crate::raster::{PixelBuffer, RasterError};
use crate::rounding::{round_value, RoundingRule};

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("lengths must be positive (got source {src_len}, destination {dest_len})")]
    ZeroLength { src_len: u32, dest_len: u32 },
    #[error("destination coordinate {dst_coord} outside 1..={dest_len}")]
    CoordOutOfRange { dst_coord: u32, dest_len: u32 },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Source and destination lengths of one axis. The scaling ratio is kept as
/// this integer pair and never pre-divided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalePair {
    src_len: u32,
    dest_len: u32,
}

impl ScalePair {
    pub fn new(src_len: u32, dest_len: u32) -> Result<Self, ScaleError> {
        if src_len == 0 || dest_len == 0 {
            return Err(ScaleError::ZeroLength { src_len, dest_len });
        }
        Ok(Self { src_len, dest_len })
    }

    pub fn src_len(&self) -> u32 {
        self.src_len
    }

    pub fn dest_len(&self) -> u32 {
        self.dest_len
    }

    /// The ratio `dest_len / src_len` as a reduced fraction.
    pub fn ratio(&self) -> (u32, u32) {
        let g = gcd(self.dest_len, self.src_len);
        (self.dest_len / g, self.src_len / g)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Raw source coordinate for a 1-based destination coordinate.
///
/// The product `dst_coord * src_len` is formed exactly in integers and
/// divided once, so there is a single rounding step in the float result.
pub fn map_coord(dst_coord: u32, pair: ScalePair) -> Result<f64, ScaleError> {
    if dst_coord == 0 || dst_coord > pair.dest_len {
        return Err(ScaleError::CoordOutOfRange {
            dst_coord,
            dest_len: pair.dest_len,
        });
    }
    let product = dst_coord as u64 * pair.src_len as u64;
    Ok(product as f64 / pair.dest_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEntry {
    /// 1-based destination coordinate.
    pub dst_coord: u32,
    /// Unrounded, unclamped source coordinate.
    pub raw_coord: f64,
    /// `raw_coord` after rounding, before clamping.
    pub rounded: i64,
    /// 1-based source index after clamping.
    pub src_index: u32,
    /// Whether `rounded` fell outside `1..=src_len`.
    pub clamped: bool,
}

/// Source index table for one axis under one rounding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pair: ScalePair,
    rule: RoundingRule,
    entries: Vec<IndexEntry>,
}

impl IndexMap {
    pub fn pair(&self) -> ScalePair {
        self.pair
    }

    pub fn rule(&self) -> RoundingRule {
        self.rule
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn src_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.src_index)
    }

    /// 0-based source offsets, ready for buffer access.
    pub fn offsets(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| e.src_index as usize - 1)
            .collect()
    }

    pub fn clamp_count(&self) -> usize {
        self.entries.iter().filter(|e| e.clamped).count()
    }

    /// Whether two maps select the same source index for every coordinate.
    pub fn same_indices(&self, other: &IndexMap) -> bool {
        self.pair == other.pair && self.src_indices().eq(other.src_indices())
    }

    /// CSV with header `dst_coord,raw_coord,src_index,clamped`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dst_coord,raw_coord,src_index,clamped\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.dst_coord, e.raw_coord, e.src_index, e.clamped
            );
        }
        out
    }
}

/// Builds the index map for `pair` under `rule`, clamping out-of-range
/// rounded values into `1..=src_len`.
pub fn build_index_map(pair: ScalePair, rule: RoundingRule) -> IndexMap {
    let src_len = pair.src_len as i64;
    let entries = (1..=pair.dest_len)
        .map(|dst_coord| {
            let raw_coord = map_coord(dst_coord, pair).expect("coordinate is within 1..=dest_len");
            // raw_coord <= src_len, so it always fits an i64
            let rounded = round_value(raw_coord, rule).expect("raw coordinate is finite");
            let clamped_value = rounded.clamp(1, src_len);
            IndexEntry {
                dst_coord,
                raw_coord,
                rounded,
                src_index: clamped_value as u32,
                clamped: clamped_value != rounded,
            }
        })
        .collect();
    IndexMap {
        pair,
        rule,
        entries,
    }
}

/// Resizes `img` to `dest_width`×`dest_height` by nearest-neighbor gathering
/// with one index map per axis. No arithmetic is done on sample values.
pub fn resize_nn(
    img: &PixelBuffer,
    dest_width: u32,
    dest_height: u32,
    rule: RoundingRule,
) -> Result<PixelBuffer, ScaleError> {
    let map_x = build_index_map(ScalePair::new(img.width() as u32, dest_width)?, rule);
    let map_y = build_index_map(ScalePair::new(img.height() as u32, dest_height)?, rule);
    Ok(resize_with_maps(img, &map_x, &map_y)?)
}

/// Gathers `img` through prebuilt axis maps.
///
/// # Panics
///
/// Panics if the maps' source lengths do not match the image.
pub fn resize_with_maps(
    img: &PixelBuffer,
    map_x: &IndexMap,
    map_y: &IndexMap,
) -> Result<PixelBuffer, RasterError> {
    assert_eq!(map_x.pair().src_len() as usize, img.width());
    assert_eq!(map_y.pair().src_len() as usize, img.height());
    let ch = img.channels();
    let dest_w = map_x.pair().dest_len() as usize;
    let dest_h = map_y.pair().dest_len() as usize;
    let stride = dest_w * ch;
    let xs = map_x.offsets();

    let mut samples = Vec::with_capacity(stride * dest_h);
    let mut prev_row: Option<usize> = None;
    for sy in map_y.offsets() {
        if prev_row == Some(sy) {
            // Repeated source row: duplicate the last output row.
            let start = samples.len() - stride;
            samples.extend_from_within(start..);
            continue;
        }
        let src = img.row(sy);
        if ch == 1 {
            samples.extend(xs.iter().map(|&sx| src[sx]));
        } else {
            for &sx in &xs {
                samples.extend_from_slice(&src[sx * ch..(sx + 1) * ch]);
            }
        }
        prev_row = Some(sy);
    }
    PixelBuffer::new(dest_w, dest_h, ch, samples)
}
