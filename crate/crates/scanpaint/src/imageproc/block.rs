use super::color::rgb_to_ycbcr;
use super::{Image, ImageError};

/// A square patch of YCbCr samples with cached per-channel means.
///
/// Matching error between two blocks ignores constant brightness offsets:
/// both blocks are mean-subtracted before squared differences are taken.
#[derive(Debug, Clone)]
pub struct Block {
    side: usize,
    samples: Vec<[f64; 3]>,
    mean: [f64; 3],
}

impl Block {
    /// Builds a block directly from YCbCr samples (row-major, `side²` of
    /// them). Mostly useful for synthetic inputs and tests.
    pub fn from_samples(side: usize, samples: Vec<[f64; 3]>) -> Result<Self, ImageError> {
        check_side(side)?;
        if samples.len() != side * side {
            return Err(ImageError::PixelCountMismatch {
                expected: side * side,
                got: samples.len(),
            });
        }
        Ok(Self::new_unchecked(side, samples))
    }

    /// Extracts the block of the given odd side centered at integer pixel
    /// coordinates, converting pixels to YCbCr.
    ///
    /// A center outside the image yields `None`. Samples that fall over the
    /// border are clamped to the nearest edge pixel.
    pub fn from_image(
        image: &Image,
        center_x: i64,
        center_y: i64,
        side: usize,
    ) -> Result<Option<Self>, ImageError> {
        check_side(side)?;
        if !image.contains(center_x, center_y) {
            return Ok(None);
        }
        let half = (side / 2) as i64;
        let mut samples = Vec::with_capacity(side * side);
        for dy in -half..=half {
            for dx in -half..=half {
                samples.push(rgb_to_ycbcr(image.get_clamped(center_x + dx, center_y + dy)));
            }
        }
        Ok(Some(Self::new_unchecked(side, samples)))
    }

    fn new_unchecked(side: usize, samples: Vec<[f64; 3]>) -> Self {
        let n = samples.len() as f64;
        let mut mean = [0.0; 3];
        for s in &samples {
            for ch in 0..3 {
                mean[ch] += s[ch];
            }
        }
        for ch in 0..3 {
            mean[ch] /= n;
        }
        Self { side, samples, mean }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    /// Per-channel arithmetic means (Y, Cb, Cr).
    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }
}

fn check_side(side: usize) -> Result<(), ImageError> {
    if side < 3 || side % 2 == 0 {
        return Err(ImageError::BadBlockSide(side));
    }
    Ok(())
}

/// Per-channel mean-subtracted MSE between two equally sized blocks:
/// the average over the block of `((s − s̄) − (t − t̄))²`.
///
/// Computed as the variance-style moment of the per-sample differences,
/// which is algebraically identical and makes the error exactly zero when
/// one block is the other plus a constant offset.
pub fn block_mse(a: &Block, b: &Block) -> Result<[f64; 3], ImageError> {
    if a.side != b.side {
        return Err(ImageError::BlockSizeMismatch(a.side, b.side));
    }
    let n = a.samples.len() as f64;
    let mut out = [0.0; 3];
    for ch in 0..3 {
        let mut diff_mean = 0.0;
        for (s, t) in a.samples.iter().zip(&b.samples) {
            diff_mean += s[ch] - t[ch];
        }
        diff_mean /= n;
        let mut acc = 0.0;
        for (s, t) in a.samples.iter().zip(&b.samples) {
            let centered = (s[ch] - t[ch]) - diff_mean;
            acc += centered * centered;
        }
        out[ch] = acc / n;
    }
    Ok(out)
}

/// Scalar matching error: the mean of the three channel MSEs.
pub fn match_error(a: &Block, b: &Block) -> Result<f64, ImageError> {
    let [y, cb, cr] = block_mse(a, b)?;
    Ok((y + cb + cr) / 3.0)
}
