//! Image container and the 2D color machinery: HSV / YCbCr conversions,
//! value-channel histogram equalization, and mean-subtracted block MSE.

mod block;
mod color;
mod equalize;

pub use block::{block_mse, match_error, Block};
pub use color::{hsv_to_rgb, rgb_to_hsv, rgb_to_ycbcr};
pub use equalize::equalize_value_channel;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("pixel buffer holds {got} pixels, expected {expected}")]
    PixelCountMismatch { expected: usize, got: usize },
    #[error("pixel {0} has a channel outside [0, 1]")]
    PixelOutOfRange(usize),
    #[error("block side must be odd and at least 3, got {0}")]
    BadBlockSide(usize),
    #[error("block sizes differ: {0} vs {1}")]
    BlockSizeMismatch(usize, usize),
}

/// An RGB raster with channels in [0, 1].
///
/// Pixels are row-major with y growing downward. Continuous coordinates put
/// pixel `(x, y)`'s center at exactly `(x as f64, y as f64)`; this convention
/// is shared by the projection and rendering code.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::BadDimensions(width, height));
        }
        if pixels.len() != width * height {
            return Err(ImageError::PixelCountMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        let bad = |c: &[f64; 3]| c.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0);
        if let Some(i) = pixels.iter().position(bad) {
            return Err(ImageError::PixelOutOfRange(i));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Result<Self, ImageError> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [f64; 3]) {
        debug_assert!(x < self.width && y < self.height);
        debug_assert!(color.iter().all(|v| (0.0..=1.0).contains(v)));
        self.pixels[y * self.width + x] = color;
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Pixel lookup with coordinates clamped to the image border.
    pub fn get_clamped(&self, x: i64, y: i64) -> [f64; 3] {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(cx, cy)
    }

    /// Bilinear sample at continuous pixel coordinates, clamped to borders.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let c00 = self.get_clamped(x0, y0);
        let c10 = self.get_clamped(x0 + 1, y0);
        let c01 = self.get_clamped(x0, y0 + 1);
        let c11 = self.get_clamped(x0 + 1, y0 + 1);
        let mut out = [0.0; 3];
        for ch in 0..3 {
            let top = c00[ch] * (1.0 - fx) + c10[ch] * fx;
            let bottom = c01[ch] * (1.0 - fx) + c11[ch] * fx;
            out[ch] = top * (1.0 - fy) + bottom * fy;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates_buffer_and_range() {
        assert!(matches!(Image::new(0, 4, vec![]), Err(ImageError::BadDimensions(0, 4))));
        assert!(matches!(
            Image::new(2, 2, vec![[0.0; 3]; 3]),
            Err(ImageError::PixelCountMismatch { expected: 4, got: 3 })
        ));
        assert!(matches!(
            Image::new(2, 1, vec![[0.0; 3], [0.0, 1.5, 0.0]]),
            Err(ImageError::PixelOutOfRange(1))
        ));
    }

    #[test]
    fn bilinear_interpolates_and_hits_centers_exactly() {
        let img = Image::new(2, 2, vec![[0.0; 3], [1.0; 3], [0.0; 3], [1.0; 3]]).unwrap();
        assert_eq!(img.sample_bilinear(0.0, 0.0), [0.0; 3]);
        assert_eq!(img.sample_bilinear(1.0, 1.0), [1.0; 3]);
        let mid = img.sample_bilinear(0.5, 0.5);
        assert!((mid[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bilinear_clamps_outside_coordinates() {
        let img = Image::new(2, 1, vec![[0.2; 3], [0.8; 3]]).unwrap();
        assert_eq!(img.sample_bilinear(-3.0, 0.0), [0.2; 3]);
        assert_eq!(img.sample_bilinear(5.0, 2.0), [0.8; 3]);
    }
}
