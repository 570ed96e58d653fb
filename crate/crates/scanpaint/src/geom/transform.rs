use nalgebra::Matrix3;

use super::{is_valid_normal, GeomError, PointCloud, TriangleMesh, Vec3, ROTATION_TOL};

/// A similarity transform `p -> s * R * p + t` with uniform positive scale
/// and a proper rotation (det R = +1), so chirality is always preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl SimilarityTransform {
    /// Validates scale positivity and rotation orthonormality (within
    /// [`ROTATION_TOL`]) before accepting the parameters.
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeomError> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(GeomError::BadScale(scale));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeomError::BadTranslation);
        }
        let residual = rotation_residual(&rotation);
        if !(residual <= ROTATION_TOL) {
            return Err(GeomError::BadRotation(residual));
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Rotates a direction without scaling or translating it. The zero
    /// invalid-normal flag maps to itself.
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }

    /// Transforms every point; normals are rotated, colors pass through.
    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let points = cloud.points().iter().map(|&p| self.apply_point(p)).collect();
        let mut out = PointCloud::new(points).expect("finite points stay finite");
        if let Some(normals) = cloud.normals() {
            let rotated = normals
                .iter()
                .map(|n| if is_valid_normal(n) { self.rotation * n } else { *n })
                .collect();
            out = out.with_normals(rotated).expect("rotation preserves unit length");
        }
        if let Some(colors) = cloud.colors() {
            out = out.with_colors(colors.to_vec()).expect("colors unchanged");
        }
        out
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(self.apply_cloud(mesh.vertices()))
            .expect("vertex count unchanged")
    }

    /// Composition `self ∘ other`: applying the result equals applying
    /// `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let inv_rot = self.rotation.transpose();
        Self {
            scale: inv_scale,
            rotation: inv_rot,
            translation: -inv_scale * (inv_rot * self.translation),
        }
    }
}

fn rotation_residual(r: &Matrix3<f64>) -> f64 {
    if !r.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rot_z(angle: f64) -> Matrix3<f64> {
        let (s, c) = angle.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn applies_scale_rotation_translation_in_order() {
        let t = SimilarityTransform::new(2.0, rot_z(std::f64::consts::FRAC_PI_2), Vec3::new(1.0, 0.0, 0.0))
            .unwrap();
        let p = t.apply_point(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p, Vec3::new(1.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rejects_reflection() {
        let mirror = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            SimilarityTransform::new(1.0, mirror, Vec3::zeros()),
            Err(GeomError::BadRotation(_))
        ));
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(SimilarityTransform::new(0.0, Matrix3::identity(), Vec3::zeros()).is_err());
        assert!(SimilarityTransform::new(-2.0, Matrix3::identity(), Vec3::zeros()).is_err());
    }

    #[test]
    fn inverse_of_scale_translate() {
        let t = SimilarityTransform::new(2.0, Matrix3::identity(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let inv = t.inverse();
        assert_relative_eq!(inv.scale(), 0.5);
        assert_relative_eq!(inv.translation(), Vec3::new(-0.5, 0.0, 0.0), epsilon = 1e-15);
        let p = Vec3::new(0.3, -1.2, 4.0);
        assert_relative_eq!(inv.apply_point(t.apply_point(p)), p, epsilon = 1e-12);
    }

    #[test]
    fn compose_applies_right_operand_first() {
        let a = SimilarityTransform::new(2.0, rot_z(0.7), Vec3::new(0.1, 0.2, 0.3)).unwrap();
        let b = SimilarityTransform::new(0.4, rot_z(-1.3), Vec3::new(-2.0, 1.0, 0.5)).unwrap();
        let p = Vec3::new(1.0, 2.0, 3.0);
        let composed = a.compose(&b);
        assert_relative_eq!(composed.apply_point(p), a.apply_point(b.apply_point(p)), epsilon = 1e-12);
    }

    #[test]
    fn cloud_transform_rotates_normals_and_keeps_invalid_flags() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)])
            .unwrap()
            .with_normals(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()])
            .unwrap();
        let t = SimilarityTransform::new(3.0, rot_z(std::f64::consts::FRAC_PI_2), Vec3::zeros()).unwrap();
        let out = t.apply_cloud(&cloud);
        let normals = out.normals().unwrap();
        assert_relative_eq!(normals[0], Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        assert_eq!(normals[1], Vec3::zeros());
    }
}
