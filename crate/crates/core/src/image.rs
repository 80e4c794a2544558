//! Grayscale tactile image buffer shared by the metric, the simulator
//! renderer and the sensor pipeline.

use alloc::vec::Vec;
use core::fmt;

/// Intensities are stored as `f64` in `[0, DYNAMIC_RANGE]`; 8-bit sources
/// map 1:1 onto integer values.
pub const DYNAMIC_RANGE: f64 = 255.0;

/// Row-major grayscale pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    /// `pixels.len()` does not equal `width * height`.
    PixelCountMismatch { expected: usize, actual: usize },
    /// A pixel is non-finite or outside `[0, DYNAMIC_RANGE]`.
    IntensityOutOfRange { index: usize },
    /// Zero-sized images are not representable.
    EmptyDimensions,
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::PixelCountMismatch { expected, actual } => {
                write!(f, "expected {expected} pixels, got {actual}")
            }
            ImageError::IntensityOutOfRange { index } => {
                write!(f, "pixel {index} outside [0, {DYNAMIC_RANGE}]")
            }
            ImageError::EmptyDimensions => write!(f, "image dimensions must be nonzero"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ImageError {}

impl TactileImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if pixels.len() != width * height {
            return Err(ImageError::PixelCountMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        for (i, &p) in pixels.iter().enumerate() {
            if !p.is_finite() || !(0.0..=DYNAMIC_RANGE).contains(&p) {
                return Err(ImageError::IntensityOutOfRange { index: i });
            }
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds from 8-bit grayscale samples.
    pub fn from_gray8(width: usize, height: usize, samples: &[u8]) -> Result<Self, ImageError> {
        let pixels = samples.iter().map(|&s| s as f64).collect();
        Self::new(width, height, pixels)
    }

    /// Builds from interleaved 8-bit RGB by unweighted channel averaging.
    pub fn from_rgb8(width: usize, height: usize, samples: &[u8]) -> Result<Self, ImageError> {
        if samples.len() != width * height * 3 {
            return Err(ImageError::PixelCountMismatch {
                expected: width * height * 3,
                actual: samples.len(),
            });
        }
        let pixels = samples
            .chunks_exact(3)
            .map(|rgb| (rgb[0] as f64 + rgb[1] as f64 + rgb[2] as f64) / 3.0)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn same_dimensions(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copies the `size`×`size` block whose top-left corner is `(x, y)`.
    pub fn block(&self, x: usize, y: usize, size: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(size * size);
        for row in y..y + size {
            out.extend_from_slice(&self.pixels[row * self.width + x..row * self.width + x + size]);
        }
        out
    }

    /// Quantizes to the nearest 8-bit level, saturating.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| libm::floor(p + 0.5).clamp(0.0, 255.0) as u8)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_count_mismatch() {
        let err = TactileImage::new(2, 2, vec![0.0; 3]).unwrap_err();
        assert_eq!(err, ImageError::PixelCountMismatch { expected: 4, actual: 3 });
    }

    #[test]
    fn rejects_out_of_range_intensity() {
        let err = TactileImage::new(1, 2, vec![0.0, 256.0]).unwrap_err();
        assert_eq!(err, ImageError::IntensityOutOfRange { index: 1 });
        assert!(TactileImage::new(1, 2, vec![0.0, -0.5]).is_err());
        assert!(TactileImage::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(TactileImage::new(0, 3, vec![]).unwrap_err(), ImageError::EmptyDimensions);
    }

    #[test]
    fn rgb_reduces_by_channel_mean() {
        let img = TactileImage::from_rgb8(1, 1, &[30, 60, 90]).unwrap();
        assert_eq!(img.pixel(0, 0), 60.0);
    }

    #[test]
    fn block_extracts_row_major() {
        let img = TactileImage::new(3, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        assert_eq!(img.block(1, 1, 2), vec![4.0, 5.0, 7.0, 8.0]);
    }
}
