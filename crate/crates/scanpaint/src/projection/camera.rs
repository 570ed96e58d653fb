use nalgebra::Matrix3;

use crate::geom::{SimilarityTransform, Vec3, ROTATION_TOL};

use super::ProjectionError;

/// A calibrated pinhole camera with two-coefficient radial distortion.
///
/// The camera frame is x right, y down, z forward: a world point maps to
/// `q = R p + t`, is visible only for `q_z > 0`, and lands on the sensor at
///
/// ```text
/// x = q_x / q_z        r² = x² + y²
/// y = q_y / q_z        ρ  = 1 + k1 r² + k2 r⁴
/// u = cx + f ρ x       v = cy + f ρ y
/// ```
///
/// with `u` growing right and `v` growing down, matching image memory order.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    focal: f64,
    k1: f64,
    k2: f64,
    rotation: Matrix3<f64>,
    translation: Vec3,
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
}

/// Continuous pixel coordinates and camera-frame depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelProjection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl PixelProjection {
    /// Nearest integer pixel (u rounds to column, v to row).
    pub fn pixel(&self) -> (i64, i64) {
        (self.u.round() as i64, self.v.round() as i64)
    }
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        focal: f64,
        k1: f64,
        k2: f64,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
        cx: f64,
        cy: f64,
    ) -> Result<Self, ProjectionError> {
        if !focal.is_finite() || focal <= 0.0 {
            return Err(ProjectionError::BadFocal(focal));
        }
        if !k1.is_finite() || !k2.is_finite() {
            return Err(ProjectionError::BadDistortion);
        }
        let residual = rotation_residual(&rotation);
        if !(residual <= ROTATION_TOL) {
            return Err(ProjectionError::BadRotation(residual));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(ProjectionError::BadTranslation);
        }
        if width == 0 || height == 0 {
            return Err(ProjectionError::BadDimensions(width, height));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(ProjectionError::BadPrincipalPoint);
        }
        Ok(Self { focal, k1, k2, rotation, translation, width, height, cx, cy })
    }

    /// A camera at the image center with no distortion; convenient base for
    /// synthetic setups.
    pub fn simple(
        focal: f64,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self, ProjectionError> {
        Self::new(focal, 0.0, 0.0, rotation, translation, width, height,
                  width as f64 / 2.0, height as f64 / 2.0)
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// Returns a copy with the principal point displaced by `(dx, dy)`.
    pub fn with_principal_shift(&self, dx: f64, dy: f64) -> Self {
        let mut out = self.clone();
        out.cx += dx;
        out.cy += dy;
        out
    }

    /// The camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera_frame(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Projects a world point; `None` when it lies on or behind the camera
    /// plane.
    pub fn project(&self, p: Vec3) -> Option<PixelProjection> {
        let q = self.to_camera_frame(p);
        if !(q.z > 0.0) {
            return None;
        }
        let x = q.x / q.z;
        let y = q.y / q.z;
        let r2 = x * x + y * y;
        let rho = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        Some(PixelProjection {
            u: self.cx + self.focal * rho * x,
            v: self.cy + self.focal * rho * y,
            depth: q.z,
        })
    }

    /// The same physical camera expressed in coordinates moved by `t`: if
    /// every world point p becomes t(p), the returned camera projects t(p)
    /// to the same pixel this camera projects p to, with depth scaled by
    /// the transform's scale.
    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        let rotation = self.rotation * t.rotation().transpose();
        let translation = t.scale() * self.translation - rotation * t.translation();
        Self { rotation, translation, ..self.clone() }
    }
}

fn rotation_residual(r: &Matrix3<f64>) -> f64 {
    if !r.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    (r.determinant() - 1.0).abs().max(ortho)
}
