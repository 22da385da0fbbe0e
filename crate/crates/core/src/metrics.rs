//! Full-reference quality metrics (MSE, SSIM), the metric polarity registry,
//! and the affine series rescaler used for plot output.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::raster::{to_luma, PixelBuffer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(usize, usize, usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("cannot rescale an empty series")]
    EmptySeries,
    #[error("invalid rescale interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("series contains a non-finite value")]
    NonFinite,
}

/// Which direction of a score means better quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    LowerBetter,
    HigherBetter,
}

impl Polarity {
    /// Orders `a` before `b` when `a` is the better score.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            Polarity::LowerBetter => a.total_cmp(&b),
            Polarity::HigherBetter => b.total_cmp(&a),
        }
    }

    /// Distance by which `score` trails `best` (non-negative when `best` is
    /// the best score).
    pub fn shortfall(self, best: f64, score: f64) -> f64 {
        match self {
            Polarity::LowerBetter => score - best,
            Polarity::HigherBetter => best - score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    /// Scored against a pristine reference.
    FullReference,
    /// Scored from the test image alone.
    NoReference,
}

/// A named metric together with its polarity and kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricId {
    name: String,
    polarity: Polarity,
    kind: MetricKind,
}

impl MetricId {
    pub fn mse() -> Self {
        Self::new("MSE", Polarity::LowerBetter, MetricKind::FullReference)
    }

    pub fn ssim() -> Self {
        Self::new("SSIM", Polarity::HigherBetter, MetricKind::FullReference)
    }

    pub fn brisque() -> Self {
        Self::new("BRISQUE", Polarity::LowerBetter, MetricKind::NoReference)
    }

    pub fn niqe() -> Self {
        Self::new("NIQE", Polarity::LowerBetter, MetricKind::NoReference)
    }

    /// A user-supplied no-reference metric.
    pub fn external(name: impl Into<String>, polarity: Polarity) -> Self {
        Self::new(name, polarity, MetricKind::NoReference)
    }

    fn new(name: impl Into<String>, polarity: Polarity, kind: MetricKind) -> Self {
        Self {
            name: name.into(),
            polarity,
            kind,
        }
    }

    /// Looks up one of the known metrics by case-insensitive name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "MSE" => Some(Self::mse()),
            "SSIM" => Some(Self::ssim()),
            "BRISQUE" => Some(Self::brisque()),
            "NIQE" => Some(Self::niqe()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Whether this crate computes the metric itself (MSE and SSIM).
    pub fn is_native(&self) -> bool {
        *self == Self::mse() || *self == Self::ssim()
    }

    /// Interval that plot series of this metric are rescaled into.
    pub fn plot_interval(&self) -> (f64, f64) {
        match self.name.to_ascii_uppercase().as_str() {
            "SSIM" => (0.6, 1.4),
            "NIQE" => (2.5, 3.0),
            "BRISQUE" => (4.0, 4.6),
            "MSE" => (5.4, 6.01),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Computes a native full-reference metric, or `None` for metrics that must
/// be scored externally.
pub fn score_native(
    metric: &MetricId,
    reference: &PixelBuffer,
    candidate: &PixelBuffer,
) -> Option<Result<f64, MetricError>> {
    if *metric == MetricId::mse() {
        Some(mse(reference, candidate))
    } else if *metric == MetricId::ssim() {
        Some(ssim(reference, candidate, &SsimParams::default()))
    } else {
        None
    }
}

fn check_shape(a: &PixelBuffer, b: &PixelBuffer) -> Result<(), MetricError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels(),
        ))
    }
}

/// Mean squared error over luma samples.
pub fn mse(a: &PixelBuffer, b: &PixelBuffer) -> Result<f64, MetricError> {
    check_shape(a, b)?;
    let (a, b) = (to_luma(a), to_luma(b));
    let sum: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.samples().len() as f64)
}

/// SSIM constants and Gaussian window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            window: 11,
            sigma: 1.5,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let center = (self.window as f64 - 1.0) / 2.0;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - center;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

/// Separable filtering restricted to the valid region.
fn filter_valid(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (width + 1 - k, height + 1 - k);
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = row[x..x + k].iter().zip(kernel).map(|(v, w)| v * w).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, w) in kernel.iter().enumerate() {
            let src = &horiz[(y + i) * ow..(y + i + 1) * ow];
            for (o, v) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }
    out
}

/// Mean SSIM over the valid region of the Gaussian-windowed SSIM map.
pub fn ssim(a: &PixelBuffer, b: &PixelBuffer, params: &SsimParams) -> Result<f64, MetricError> {
    check_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < params.window || h < params.window {
        return Err(MetricError::TooSmall {
            width: w,
            height: h,
            window: params.window,
        });
    }
    let (a, b) = (to_luma(a), to_luma(b));
    let x: Vec<f64> = a.samples().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.samples().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let kernel = params.kernel();
    let mu_x = filter_valid(&x, w, h, &kernel);
    let mu_y = filter_valid(&y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let (c1, c2) = (params.c1(), params.c2());
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// Affinely maps `values` so that the minimum lands on `lo` and the maximum
/// on `hi`. A constant series maps to the interval midpoint.
pub fn rescale_series(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>, MetricError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(MetricError::InvalidInterval { lo, hi });
    }
    if values.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(vec![(lo + hi) / 2.0; values.len()]);
    }
    let scale = (hi - lo) / (max - min);
    Ok(values
        .iter()
        .map(|&v| if v == max { hi } else { lo + (v - min) * scale })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn polarity_registry() {
        assert_eq!(MetricId::mse().polarity(), Polarity::LowerBetter);
        assert_eq!(MetricId::brisque().polarity(), Polarity::LowerBetter);
        assert_eq!(MetricId::niqe().polarity(), Polarity::LowerBetter);
        assert_eq!(MetricId::ssim().polarity(), Polarity::HigherBetter);
        assert_eq!(MetricId::builtin("ssim"), Some(MetricId::ssim()));
        assert_eq!(
            MetricId::builtin("Niqe").unwrap().kind(),
            MetricKind::NoReference
        );
        assert_eq!(MetricId::builtin("PSNR"), None);
        assert!(MetricId::mse().is_native());
        assert!(!MetricId::niqe().is_native());
    }

    #[test]
    fn mse_examples() {
        let a = PixelBuffer::gray(2, 1, vec![0, 0]).unwrap();
        let b = PixelBuffer::gray(2, 1, vec![2, 4]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 10.0);
        let white = PixelBuffer::filled(3, 3, 1, 255).unwrap();
        let black = PixelBuffer::filled(3, 3, 1, 0).unwrap();
        assert_eq!(mse(&white, &black).unwrap(), 65025.0);
        let c = PixelBuffer::gray(1, 2, vec![0, 0]).unwrap();
        assert!(matches!(
            mse(&a, &c),
            Err(MetricError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn mse_on_rgb_uses_luma() {
        let a = PixelBuffer::rgb(1, 1, vec![255, 0, 0]).unwrap();
        let b = PixelBuffer::rgb(1, 1, vec![0, 0, 0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 76.0 * 76.0);
    }

    #[test]
    fn ssim_constants() {
        let p = SsimParams::default();
        assert_abs_diff_eq!(p.c1(), 6.5025, epsilon = 1e-12);
        assert_abs_diff_eq!(p.c2(), 58.5225, epsilon = 1e-12);
        let k = p.kernel();
        assert_eq!(k.len(), 11);
        assert_abs_diff_eq!(k.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn ssim_examples() {
        let p = SsimParams::default();
        let x =
            PixelBuffer::gray(16, 12, (0..192).map(|i| (i * 37 % 256) as u8).collect()).unwrap();
        assert_abs_diff_eq!(ssim(&x, &x, &p).unwrap(), 1.0, epsilon = 1e-12);

        let a = PixelBuffer::filled(20, 20, 1, 100).unwrap();
        assert_abs_diff_eq!(ssim(&a, &a, &p).unwrap(), 1.0, epsilon = 1e-12);

        let zero = PixelBuffer::filled(20, 20, 1, 0).unwrap();
        let full = PixelBuffer::filled(20, 20, 1, 255).unwrap();
        let expected = 6.5025 / 65031.5025;
        assert_abs_diff_eq!(ssim(&zero, &full, &p).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 9.9990e-5, epsilon = 1e-8);
    }

    #[test]
    fn ssim_errors() {
        let p = SsimParams::default();
        let small = PixelBuffer::filled(10, 30, 1, 0).unwrap();
        assert!(matches!(
            ssim(&small, &small, &p),
            Err(MetricError::TooSmall { .. })
        ));
        let a = PixelBuffer::filled(12, 12, 1, 0).unwrap();
        let b = PixelBuffer::filled(12, 13, 1, 0).unwrap();
        assert!(matches!(
            ssim(&a, &b, &p),
            Err(MetricError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn rescale_examples() {
        let out = rescale_series(&[0.0, 1.0, 2.0], 0.6, 1.4).unwrap();
        for (o, e) in out.iter().zip([0.6, 1.0, 1.4]) {
            assert_abs_diff_eq!(*o, e, epsilon = 1e-15);
        }
        assert_eq!(
            rescale_series(&[5.0, 5.0, 5.0], 2.5, 3.0).unwrap(),
            vec![2.75; 3]
        );
        assert_eq!(
            rescale_series(&[3.0, 7.0], 4.0, 4.6).unwrap(),
            vec![4.0, 4.6]
        );
        assert_eq!(rescale_series(&[], 0.0, 1.0), Err(MetricError::EmptySeries));
        assert!(matches!(
            rescale_series(&[1.0], 1.0, 1.0),
            Err(MetricError::InvalidInterval { .. })
        ));
        assert_eq!(
            rescale_series(&[f64::NAN], 0.0, 1.0),
            Err(MetricError::NonFinite)
        );
    }

    fn arb_pair() -> impl Strategy<Value = (PixelBuffer, PixelBuffer)> {
        (11usize..24, 11usize..24).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(any::<u8>(), w * h),
                proptest::collection::vec(any::<u8>(), w * h),
            )
                .prop_map(move |(a, b)| {
                    (
                        PixelBuffer::gray(w, h, a).unwrap(),
                        PixelBuffer::gray(w, h, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mse_symmetric_and_zero_iff_equal((a, b) in arb_pair()) {
            let ab = mse(&a, &b).unwrap();
            prop_assert_eq!(ab, mse(&b, &a).unwrap());
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn ssim_symmetric_and_bounded((a, b) in arb_pair()) {
            let p = SsimParams::default();
            let ab = ssim(&a, &b, &p).unwrap();
            let ba = ssim(&b, &a, &p).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ab <= 1.0 + 1e-12);
            prop_assert!(ab >= -1.0 - 1e-12);
        }

        #[test]
        fn rescale_preserves_order(values in proptest::collection::vec(-1e6f64..1e6, 1..30)) {
            let out = rescale_series(&values, 5.4, 6.01).unwrap();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..values.len() {
                prop_assert!(out[i] >= 5.4 - 1e-12 && out[i] <= 6.01 + 1e-12);
                if min != max && values[i] == min {
                    prop_assert_eq!(out[i], 5.4);
                }
                if min != max && values[i] == max {
                    prop_assert_eq!(out[i], 6.01);
                }
                for j in 0..values.len() {
                    if values[i] <= values[j] {
                        prop_assert!(out[i] <= out[j]);
                    }
                }
            }
        }
    }
}
