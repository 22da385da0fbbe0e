//! 8-bit raster images, the binary PNM codec, and the geometry used to
//! prepare a corpus: crop, box downsampling and luma conversion.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::rounding::{round_ratio, RoundingRule};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid dimensions {width}x{height}x{channels}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("sample count {actual} does not match {width}x{height}x{channels}")]
    SampleCount {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("crop {rect} does not fit inside a {width}x{height} image")]
    CropOutOfBounds {
        rect: CropRect,
        width: usize,
        height: usize,
    },
    #[error("{width}x{height} is not divisible by downsampling factor {factor}")]
    NotDivisible {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("downsampling factor must be positive")]
    ZeroFactor,
}

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PNM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u64),
    #[error("truncated PNM payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Image(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelBuffer {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl PixelBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<u8>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                channels,
            });
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels));
        if expected != Some(samples.len()) {
            return Err(RasterError::SampleCount {
                width,
                height,
                channels,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn gray(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 1, samples)
    }

    pub fn rgb(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 3, samples)
    }

    /// A buffer with every sample set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: u8,
    ) -> Result<Self, RasterError> {
        let len = width.saturating_mul(height).saturating_mul(channels);
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    /// Sample at 0-based column `x`, row `y`, channel `c`.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// One row of interleaved samples.
    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        let stride = self.width * self.channels;
        &self.samples[y * stride..(y + 1) * stride]
    }

    pub fn same_shape(&self, other: &PixelBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// A crop rectangle with a 1-based top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn new(left: usize, top: usize, width: usize, height: usize) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    /// The rectangle covering all of `img`.
    pub fn full(img: &PixelBuffer) -> Self {
        Self::new(1, 1, img.width(), img.height())
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.left >= 1
            && self.top >= 1
            && self.width >= 1
            && self.height >= 1
            && self.left - 1 + self.width <= width
            && self.top - 1 + self.height <= height
    }

    /// Expresses `inner`, given relative to this rectangle, in the
    /// coordinates this rectangle is relative to.
    pub fn compose(&self, inner: &CropRect) -> CropRect {
        CropRect::new(
            self.left + inner.left - 1,
            self.top + inner.top - 1,
            inner.width,
            inner.height,
        )
    }
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, {}x{})",
            self.left, self.top, self.width, self.height
        )
    }
}

fn is_pnm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if is_pnm_space(b) {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, PnmError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::MalformedHeader(format!("missing {what}")));
        }
        if self.pos < self.bytes.len() && !is_pnm_space(self.bytes[self.pos]) {
            return Err(PnmError::MalformedHeader(format!(
                "unexpected byte 0x{:02x} after {what}",
                self.bytes[self.pos]
            )));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("{what} is too large")))
    }
}

/// Decodes a binary P5 (gray) or P6 (RGB) image with maxval 255.
///
/// `#` comments are accepted between header fields. Exactly one whitespace
/// byte separates the maxval from the payload; bytes past the payload are
/// ignored.
pub fn load_pnm(bytes: &[u8]) -> Result<PixelBuffer, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(PnmError::MalformedHeader("expected magic P5 or P6".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos >= bytes.len() || !is_pnm_space(bytes[cur.pos]) {
        return Err(PnmError::MalformedHeader(
            "missing whitespace after magic".into(),
        ));
    }
    cur.skip_space_and_comments();
    let width = cur.number("width")?;
    cur.skip_space_and_comments();
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    if cur.pos >= bytes.len() {
        return Err(PnmError::Truncated {
            expected: (width * height) as usize * channels,
            actual: 0,
        });
    }
    let payload = &bytes[cur.pos + 1..];
    let expected = usize::try_from(width)
        .ok()
        .and_then(|w| w.checked_mul(usize::try_from(height).ok()?))
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| PnmError::MalformedHeader("dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            actual: payload.len(),
        });
    }
    Ok(PixelBuffer::new(
        width as usize,
        height as usize,
        channels,
        payload[..expected].to_vec(),
    )?)
}

/// Encodes `img` as binary PNM: `P5` for gray, `P6` for RGB.
pub fn save_pnm(img: &PixelBuffer) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.samples());
    out
}

pub fn read_pnm_file(path: impl AsRef<Path>) -> Result<PixelBuffer, PnmError> {
    load_pnm(&fs::read(path)?)
}

pub fn write_pnm_file(path: impl AsRef<Path>, img: &PixelBuffer) -> std::io::Result<()> {
    fs::write(path, save_pnm(img))
}

/// Copies the samples inside `rect` into a new buffer.
pub fn crop(img: &PixelBuffer, rect: CropRect) -> Result<PixelBuffer, RasterError> {
    if !rect.fits(img.width(), img.height()) {
        return Err(RasterError::CropOutOfBounds {
            rect,
            width: img.width(),
            height: img.height(),
        });
    }
    let ch = img.channels();
    let x0 = (rect.left - 1) * ch;
    let x1 = x0 + rect.width * ch;
    let mut samples = Vec::with_capacity(rect.width * rect.height * ch);
    for y in rect.top - 1..rect.top - 1 + rect.height {
        samples.extend_from_slice(&img.row(y)[x0..x1]);
    }
    PixelBuffer::new(rect.width, rect.height, ch, samples)
}

/// Replaces each `factor`×`factor` block by its per-channel mean, rounded
/// half away from zero.
pub fn downsample_box(img: &PixelBuffer, factor: usize) -> Result<PixelBuffer, RasterError> {
    if factor == 0 {
        return Err(RasterError::ZeroFactor);
    }
    if !img.width().is_multiple_of(factor) || !img.height().is_multiple_of(factor) {
        return Err(RasterError::NotDivisible {
            width: img.width(),
            height: img.height(),
            factor,
        });
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let (ow, oh) = (img.width() / factor, img.height() / factor);
    let block = (factor * factor) as i64;
    let mut sums = vec![0i64; ow * ch];
    let mut samples = Vec::with_capacity(ow * oh * ch);
    for oy in 0..oh {
        sums.iter_mut().for_each(|s| *s = 0);
        for y in oy * factor..(oy + 1) * factor {
            for (x, px) in img.row(y).chunks_exact(ch).enumerate() {
                let base = (x / factor) * ch;
                for (c, &v) in px.iter().enumerate() {
                    sums[base + c] += v as i64;
                }
            }
        }
        samples.extend(
            sums.iter()
                .map(|&s| round_ratio(s, block, RoundingRule::HalfAwayFromZero) as u8),
        );
    }
    PixelBuffer::new(ow, oh, ch, samples)
}

/// Converts to a single luma channel with Rec.601 weights; gray input is
/// returned unchanged.
pub fn to_luma(img: &PixelBuffer) -> PixelBuffer {
    if img.channels() == 1 {
        return img.clone();
    }
    let samples = img
        .samples()
        .chunks_exact(3)
        .map(|px| {
            let weighted = 299 * px[0] as i64 + 587 * px[1] as i64 + 114 * px[2] as i64;
            round_ratio(weighted, 1000, RoundingRule::HalfAwayFromZero) as u8
        })
        .collect();
    PixelBuffer {
        width: img.width(),
        height: img.height(),
        channels: 1,
        samples,
    }
}
