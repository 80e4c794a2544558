//! Windowed structural-similarity metric and the deformation score derived
//! from it.
//!
//! The similarity of two images is evaluated per kernel window as
//!
//! ```text
//! s = (2·mu_x·mu_y + c1)(2·sigma_xy + c2)
//!     -----------------------------------------
//!     (mu_x² + mu_y² + c1)(sigma_x² + sigma_y² + c2)
//! ```
//!
//! with the uniform square kernel slid at stride 1 over every fully
//! contained window position, and the final score being the mean over
//! windows clamped into `[0, 1]`. The deformation score of a live frame
//! against its undeformed reference is `1 - ssim`.
//!
//! The sliding pass is computed from summed-area tables, O(1) per window
//! independent of kernel size; [`window_stats`] keeps the direct two-pass
//! route for single blocks.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::image::{TactileImage, DYNAMIC_RANGE};

/// Default kernel edge length in pixels.
pub const DEFAULT_KERNEL_SIZE: usize = 7;
/// Deformation threshold above which a sensor counts as in contact.
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.05;

/// Parameters of the windowed metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Window edge length in pixels; odd, >= 3.
    pub kernel_size: usize,
    /// Regularising constant on the luminance term.
    pub c1: f64,
    /// Regularising constant on the contrast/structure term.
    pub c2: f64,
    /// Intensity dynamic range L.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    /// Standard constants c1 = (0.01 L)², c2 = (0.03 L)² for L = 255.
    fn default() -> Self {
        Self::for_dynamic_range(DYNAMIC_RANGE)
    }
}

impl SsimParams {
    pub fn for_dynamic_range(l: f64) -> Self {
        Self {
            kernel_size: DEFAULT_KERNEL_SIZE,
            c1: (0.01 * l) * (0.01 * l),
            c2: (0.03 * l) * (0.03 * l),
            dynamic_range: l,
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(MetricError::InvalidParams("kernel_size must be odd and >= 3"));
        }
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(MetricError::InvalidParams("c1 and c2 must be positive"));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(MetricError::InvalidParams("dynamic_range must be positive"));
        }
        Ok(())
    }
}

/// Population statistics of one window pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub sigma_xy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricError {
    /// The two images differ in width or height.
    DimensionMismatch,
    /// An image is smaller than the kernel in some dimension.
    ImageTooSmall { width: usize, height: usize, kernel: usize },
    /// The two pixel blocks differ in length, or a block is empty.
    BlockMismatch { x_len: usize, y_len: usize },
    InvalidParams(&'static str),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::DimensionMismatch => write!(f, "images have different dimensions"),
            MetricError::ImageTooSmall { width, height, kernel } => {
                write!(f, "{width}x{height} image smaller than {kernel}x{kernel} kernel")
            }
            MetricError::BlockMismatch { x_len, y_len } => {
                write!(f, "pixel blocks of length {x_len} and {y_len} cannot be compared")
            }
            MetricError::InvalidParams(msg) => write!(f, "invalid metric parameters: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricError {}

/// Population means, variances and covariance of two equally sized blocks.
pub fn window_stats(x_window: &[f64], y_window: &[f64]) -> Result<WindowStats, MetricError> {
    if x_window.len() != y_window.len() || x_window.is_empty() {
        return Err(MetricError::BlockMismatch {
            x_len: x_window.len(),
            y_len: y_window.len(),
        });
    }
    let n = x_window.len() as f64;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for (&x, &y) in x_window.iter().zip(y_window) {
        sum_x += x;
        sum_y += y;
    }
    let mu_x = sum_x / n;
    let mu_y = sum_y / n;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for (&x, &y) in x_window.iter().zip(y_window) {
        let dx = x - mu_x;
        let dy = y - mu_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    Ok(WindowStats {
        mu_x,
        mu_y,
        sigma_x2: var_x / n,
        sigma_y2: var_y / n,
        sigma_xy: cov / n,
    })
}

/// Summed-area tables for one image pair: Σx, Σy, Σx², Σy², Σxy, each with a
/// zero first row/column so any rectangle sum is four lookups.
struct MomentTables {
    width: usize,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<f64>,
}

impl MomentTables {
    fn build(a: &TactileImage, b: &TactileImage) -> Self {
        let (w, h) = (a.width(), a.height());
        let stride = w + 1;
        let len = stride * (h + 1);
        let mut t = Self {
            width: stride,
            sx: vec![0.0; len],
            sy: vec![0.0; len],
            sxx: vec![0.0; len],
            syy: vec![0.0; len],
            sxy: vec![0.0; len],
        };
        let pa = a.pixels();
        let pb = b.pixels();
        for row in 0..h {
            let mut run_x = 0.0;
            let mut run_y = 0.0;
            let mut run_xx = 0.0;
            let mut run_yy = 0.0;
            let mut run_xy = 0.0;
            for col in 0..w {
                let x = pa[row * w + col];
                let y = pb[row * w + col];
                run_x += x;
                run_y += y;
                run_xx += x * x;
                run_yy += y * y;
                run_xy += x * y;
                let up = row * stride + col + 1;
                let here = (row + 1) * stride + col + 1;
                t.sx[here] = t.sx[up] + run_x;
                t.sy[here] = t.sy[up] + run_y;
                t.sxx[here] = t.sxx[up] + run_xx;
                t.syy[here] = t.syy[up] + run_yy;
                t.sxy[here] = t.sxy[up] + run_xy;
            }
        }
        t
    }

    #[inline]
    fn rect(&self, table: &[f64], x0: usize, y0: usize, k: usize) -> f64 {
        let s = self.width;
        table[(y0 + k) * s + x0 + k] + table[y0 * s + x0]
            - table[y0 * s + x0 + k]
            - table[(y0 + k) * s + x0]
    }
}

fn check_pair(a: &TactileImage, b: &TactileImage, p: &SsimParams) -> Result<(), MetricError> {
    p.validate()?;
    if !a.same_dimensions(b) {
        return Err(MetricError::DimensionMismatch);
    }
    if a.width() < p.kernel_size || a.height() < p.kernel_size {
        return Err(MetricError::ImageTooSmall {
            width: a.width(),
            height: a.height(),
            kernel: p.kernel_size,
        });
    }
    Ok(())
}

/// Mean per-window similarity of `a` against `b`, clamped into `[0, 1]`.
///
/// Symmetric in its image arguments.
pub fn ssim(a: &TactileImage, b: &TactileImage, p: &SsimParams) -> Result<f64, MetricError> {
    check_pair(a, b, p)?;
    let k = p.kernel_size;
    let nw = (k * k) as f64;
    let tables = MomentTables::build(a, b);
    let cols = a.width() - k + 1;
    let rows = a.height() - k + 1;
    let mut total = 0.0;
    for y0 in 0..rows {
        for x0 in 0..cols {
            let sum_x = tables.rect(&tables.sx, x0, y0, k);
            let sum_y = tables.rect(&tables.sy, x0, y0, k);
            let sum_xx = tables.rect(&tables.sxx, x0, y0, k);
            let sum_yy = tables.rect(&tables.syy, x0, y0, k);
            let sum_xy = tables.rect(&tables.sxy, x0, y0, k);
            let mu_x = sum_x / nw;
            let mu_y = sum_y / nw;
            // Rounding can drive a constant window's variance fractionally
            // negative; the c2 terms keep the quotient finite either way.
            let var_x = (sum_xx / nw - mu_x * mu_x).max(0.0);
            let var_y = (sum_yy / nw - mu_y * mu_y).max(0.0);
            let cov = sum_xy / nw - mu_x * mu_y;
            total += ((2.0 * mu_x * mu_y + p.c1) * (2.0 * cov + p.c2))
                / ((mu_x * mu_x + mu_y * mu_y + p.c1) * (var_x + var_y + p.c2));
        }
    }
    Ok((total / (rows * cols) as f64).clamp(0.0, 1.0))
}

/// Deformation score of a live frame against its undeformed reference:
/// `1 - ssim`, in `[0, 1]`, larger meaning more deformation.
pub fn deformation(
    live: &TactileImage,
    reference: &TactileImage,
    p: &SsimParams,
) -> Result<f64, MetricError> {
    Ok(1.0 - ssim(live, reference, p)?)
}

/// Contact test on a deformation score: strictly greater than the threshold.
pub fn is_contact(delta: f64, threshold: f64) -> bool {
    delta > threshold
}
