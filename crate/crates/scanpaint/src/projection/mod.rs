//! Perspective cameras, depth-buffer rendering, and the per-pixel quality
//! masks that weight each photo's contribution to a surface point.

mod cache;
mod camera;
mod dump;
mod masks;
mod raster;

pub use cache::{geometry_digest, mask_cache_key, MaskCache};
pub use camera::{Camera, PixelProjection};
pub use dump::{write_depth_png16, write_mask_png16};
pub use masks::{
    angle_mask, border_mask, combined_mask, depth_mask, full_mask, is_visible, MaskParams,
    QualityMask,
};
pub use raster::{render_depth_map, render_gbuffer, DepthMap, GeometryBuffer, Surface};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("focal length must be finite and positive, got {0}")]
    BadFocal(f64),
    #[error("distortion coefficients must be finite")]
    BadDistortion,
    #[error("camera rotation is not orthonormal with determinant +1 (residual {0:.3e})")]
    BadRotation(f64),
    #[error("camera image dimensions must be positive, got {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("camera principal point must be finite")]
    BadPrincipalPoint,
    #[error("camera translation must be finite")]
    BadTranslation,
    #[error("mask weight at pixel {0} is outside [0, 1]")]
    MaskValueOutOfRange(usize),
    #[error("mask buffer holds {got} weights, expected {expected}")]
    MaskSizeMismatch { expected: usize, got: usize },
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    MaskDimensionMismatch(usize, usize, usize, usize),
    #[error("border falloff distance must be positive, got {0}")]
    BadBorderDelta(f64),
    #[error("depth discontinuity fraction must be positive, got {0}")]
    BadDiscontinuityFraction(f64),
}
