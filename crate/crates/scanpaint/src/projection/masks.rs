use crate::geom::{is_valid_normal, Vec3};

use super::camera::Camera;
use super::raster::{DepthMap, GeometryBuffer};
use super::ProjectionError;

/// Per-pixel contribution weights in [0, 1]; 0 outside the rendered
/// footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityMask {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl QualityMask {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self, ProjectionError> {
        if weights.len() != width * height {
            return Err(ProjectionError::MaskSizeMismatch {
                expected: width * height,
                got: weights.len(),
            });
        }
        if let Some(i) = weights
            .iter()
            .position(|w| !w.is_finite() || *w < 0.0 || *w > 1.0)
        {
            return Err(ProjectionError::MaskValueOutOfRange(i));
        }
        Ok(Self { width, height, weights })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    /// Weight lookup with coordinates clamped to the mask border.
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(cx, cy)
    }

    /// Bilinear sample at continuous pixel coordinates, clamped to borders.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = self.get_clamped(x0, y0) * (1.0 - fx) + self.get_clamped(x0 + 1, y0) * fx;
        let bot = self.get_clamped(x0, y0 + 1) * (1.0 - fx) + self.get_clamped(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Tunables for the border mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Distance (in pixels) over which border influence fades out.
    pub border_delta: f64,
    /// Depth jumps larger than this fraction of the covered depth range
    /// count as discontinuities.
    pub depth_discontinuity_frac: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { border_delta: 20.0, depth_discontinuity_frac: 0.01 }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        if !self.border_delta.is_finite() || self.border_delta <= 0.0 {
            return Err(ProjectionError::BadBorderDelta(self.border_delta));
        }
        if !self.depth_discontinuity_frac.is_finite() || self.depth_discontinuity_frac <= 0.0 {
            return Err(ProjectionError::BadDiscontinuityFraction(self.depth_discontinuity_frac));
        }
        Ok(())
    }
}

/// How squarely each pixel's surface faces the camera: `|n̂ · v̂|` clamped
/// to [0, 1], where v̂ points from the surface to the camera center.
///
/// Normals are flipped toward the camera before the dot product, so scans
/// with inconsistent normal orientation still weight correctly. Pixels
/// without coverage or without a valid normal get 0.
pub fn angle_mask(gbuf: &GeometryBuffer, cam: &Camera) -> QualityMask {
    let center = cam.center();
    let (w, h) = (gbuf.width(), gbuf.height());
    let mut weights = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !gbuf.depth.is_covered(x, y) {
                continue;
            }
            let n = gbuf.normals[idx];
            if !is_valid_normal(&n) {
                continue;
            }
            let to_cam = center - gbuf.positions[idx];
            let len = to_cam.norm();
            if len == 0.0 {
                continue;
            }
            weights[idx] = (n.dot(&to_cam).abs() / len).clamp(0.0, 1.0);
        }
    }
    QualityMask { width: w, height: h, weights }
}

/// Linear preference for nearer surfaces: 1 at the smallest covered depth,
/// 0 at the largest. A constant-depth map weights every covered pixel 1.
pub fn depth_mask(depth: &DepthMap) -> QualityMask {
    let (w, h) = (depth.width(), depth.height());
    let mut weights = vec![0.0; w * h];
    if let Some((lo, hi)) = depth.finite_range() {
        let span = hi - lo;
        // A span at rounding-noise level means a constant-depth surface.
        let constant = span <= 1e-9 * hi.abs().max(lo.abs());
        for (i, &d) in depth.values().iter().enumerate() {
            if d.is_finite() {
                weights[i] = if constant { 1.0 } else { ((hi - d) / span).clamp(0.0, 1.0) };
            }
        }
    }
    QualityMask { width: w, height: h, weights }
}

/// Confidence by distance from depth borders.
///
/// Border pixels are covered pixels that either touch the footprint edge
/// (a 4-neighbor is uncovered or off-image) or sit on a depth
/// discontinuity (4-neighbor depth jump above the configured fraction of
/// the covered depth range). Weight ramps linearly from 0 on a border to 1
/// at `border_delta` pixels away, measured in city-block (L1) distance.
pub fn border_mask(depth: &DepthMap, params: &MaskParams) -> Result<QualityMask, ProjectionError> {
    params.validate()?;
    let (w, h) = (depth.width(), depth.height());
    let mut weights = vec![0.0; w * h];
    let Some((lo, hi)) = depth.finite_range() else {
        return Ok(QualityMask { width: w, height: h, weights });
    };
    // The floor keeps interpolation noise on (near-)constant-depth surfaces
    // from being read as a discontinuity.
    let jump = (params.depth_discontinuity_frac * (hi - lo)).max(1e-9 * hi.abs());

    let border = detect_borders(depth, jump);
    let dist = l1_distance_transform(w, h, &border);
    for (i, &d) in depth.values().iter().enumerate() {
        if d.is_finite() {
            weights[i] = (dist[i] / params.border_delta).min(1.0);
        }
    }
    Ok(QualityMask { width: w, height: h, weights })
}

fn detect_borders(depth: &DepthMap, jump: f64) -> Vec<bool> {
    let (w, h) = (depth.width(), depth.height());
    let mut border = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if !d.is_finite() {
                continue;
            }
            let mut on_border = false;
            let neighbors =
                [(x as i64 - 1, y as i64), (x as i64 + 1, y as i64), (x as i64, y as i64 - 1), (x as i64, y as i64 + 1)];
            for (nx, ny) in neighbors {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    on_border = true;
                    break;
                }
                let nd = depth.get(nx as usize, ny as usize);
                if !nd.is_finite() || (nd - d).abs() > jump {
                    on_border = true;
                    break;
                }
            }
            border[y * w + x] = on_border;
        }
    }
    border
}

/// Exact city-block distance to the nearest marked pixel, via the two-pass
/// (1, 2)-weighted chamfer recurrence (with L1 the diagonal step is never
/// shorter than two axis steps, so the sweep is exact). Pixels in images
/// with no marked pixel end up at +∞.
fn l1_distance_transform(w: usize, h: usize, marked: &[bool]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; w * h];
    for i in 0..w * h {
        if marked[i] {
            dist[i] = 0.0;
        }
    }
    // Forward pass: left, up, up-left, up-right.
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut best = dist[i];
            if x > 0 {
                best = best.min(dist[i - 1] + 1.0);
            }
            if y > 0 {
                best = best.min(dist[i - w] + 1.0);
                if x > 0 {
                    best = best.min(dist[i - w - 1] + 2.0);
                }
                if x + 1 < w {
                    best = best.min(dist[i - w + 1] + 2.0);
                }
            }
            dist[i] = best;
        }
    }
    // Backward pass: right, down, down-right, down-left.
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut best = dist[i];
            if x + 1 < w {
                best = best.min(dist[i + 1] + 1.0);
            }
            if y + 1 < h {
                best = best.min(dist[i + w] + 1.0);
                if x + 1 < w {
                    best = best.min(dist[i + w + 1] + 2.0);
                }
                if x > 0 {
                    best = best.min(dist[i + w - 1] + 2.0);
                }
            }
            dist[i] = best;
        }
    }
    dist
}

/// Per-pixel product of the three masks. All dimensions must agree.
pub fn combined_mask(
    angle: &QualityMask,
    depth: &QualityMask,
    border: &QualityMask,
) -> Result<QualityMask, ProjectionError> {
    for m in [depth, border] {
        if m.width != angle.width || m.height != angle.height {
            return Err(ProjectionError::MaskDimensionMismatch(
                angle.width, angle.height, m.width, m.height,
            ));
        }
    }
    let weights = angle
        .weights
        .iter()
        .zip(&depth.weights)
        .zip(&border.weights)
        .map(|((a, d), b)| a * d * b)
        .collect();
    Ok(QualityMask { width: angle.width, height: angle.height, weights })
}

/// The three per-pixel masks of one rendered view multiplied together.
pub fn full_mask(
    gbuf: &GeometryBuffer,
    cam: &Camera,
    params: &MaskParams,
) -> Result<QualityMask, ProjectionError> {
    let angle = angle_mask(gbuf, cam);
    let depth = depth_mask(&gbuf.depth);
    let border = border_mask(&gbuf.depth, params)?;
    combined_mask(&angle, &depth, &border)
}

/// Whether a world point is the visible surface in this view: it must
/// project in front of the camera onto an in-image pixel whose rendered
/// depth is within `eps` of the point's own depth.
pub fn is_visible(p: Vec3, cam: &Camera, depth: &DepthMap, eps: f64) -> bool {
    let Some(proj) = cam.project(p) else {
        return false;
    };
    let (x, y) = proj.pixel();
    if x < 0 || y < 0 || x >= depth.width() as i64 || y >= depth.height() as i64 {
        return false;
    }
    proj.depth <= depth.get(x as usize, y as usize) + eps
}
