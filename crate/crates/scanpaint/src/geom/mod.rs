//! Core geometry: point clouds, triangle meshes, similarity transforms,
//! axis-aligned bounds, normal estimation and exact nearest-neighbor search.

mod kdtree;
mod normals;
mod transform;

pub use kdtree::{nearest_linear, KdTree3};
pub use normals::estimate_normals;
pub use transform::SimilarityTransform;

use nalgebra::Vector3;
use thiserror::Error;

/// 3D vector; used for points, directions and normals alike.
pub type Vec3 = Vector3<f64>;

/// Normals may deviate from unit length by at most this much.
pub const NORMAL_UNIT_TOL: f64 = 1e-6;

/// Rotation matrices may deviate from orthonormality / det +1 by at most this.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("point cloud contains a non-finite coordinate at index {0}")]
    NonFinitePoint(usize),
    #[error("normal at index {0} is neither unit length nor the zero invalid flag")]
    BadNormal(usize),
    #[error("color at index {0} has a channel outside [0, 1]")]
    BadColor(usize),
    #[error("attribute count {got} does not match point count {expected}")]
    AttributeMismatch { expected: usize, got: usize },
    #[error("face {face} references vertex {index}, but only {vertices} vertices exist")]
    FaceIndexOutOfRange { face: usize, index: usize, vertices: usize },
    #[error("face {0} is degenerate (repeated vertex)")]
    DegenerateFace(usize),
    #[error("scale must be finite and positive, got {0}")]
    BadScale(f64),
    #[error("rotation matrix is not orthonormal with determinant +1 (residual {0:.3e})")]
    BadRotation(f64),
    #[error("translation contains a non-finite component")]
    BadTranslation,
    #[error("operation needs a non-empty point cloud")]
    EmptyCloud,
    #[error("normal estimation needs k >= 3, got {0}")]
    NeighborhoodTooSmall(usize),
    #[error("normal estimation with k = {k} needs at least {} points, cloud has {got}", .k + 1)]
    InsufficientPoints { k: usize, got: usize },
}

/// Returns true for a normal carrying real direction information.
///
/// The all-zero vector is the flag for "no valid normal here" and is kept
/// in place so normal arrays stay parallel to point arrays.
pub fn is_valid_normal(n: &Vec3) -> bool {
    n.x != 0.0 || n.y != 0.0 || n.z != 0.0
}

fn check_normal(n: &Vec3) -> bool {
    if !(n.x.is_finite() && n.y.is_finite() && n.z.is_finite()) {
        return false;
    }
    !is_valid_normal(n) || (n.norm() - 1.0).abs() <= NORMAL_UNIT_TOL
}

/// A point cloud with optional per-point normals and colors.
///
/// Invariants, enforced at construction: coordinates are finite, attribute
/// arrays are parallel to the point array, normals are unit length (or the
/// zero invalid flag), color channels lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeomError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(GeomError::NonFinitePoint(i));
            }
        }
        Ok(Self { points, normals: None, colors: None })
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self, GeomError> {
        if normals.len() != self.points.len() {
            return Err(GeomError::AttributeMismatch {
                expected: self.points.len(),
                got: normals.len(),
            });
        }
        if let Some(i) = normals.iter().position(|n| !check_normal(n)) {
            return Err(GeomError::BadNormal(i));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self, GeomError> {
        if colors.len() != self.points.len() {
            return Err(GeomError::AttributeMismatch {
                expected: self.points.len(),
                got: colors.len(),
            });
        }
        let bad = |c: &[f64; 3]| c.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0);
        if let Some(i) = colors.iter().position(bad) {
            return Err(GeomError::BadColor(i));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        self.colors.as_deref()
    }
}

/// An indexed triangle mesh over a [`PointCloud`].
///
/// Faces hold counter-clockwise vertex indices; every index is in range and
/// no face repeats a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: PointCloud,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: PointCloud, faces: Vec<[usize; 3]>) -> Result<Self, GeomError> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(GeomError::FaceIndexOutOfRange { face: fi, index: v, vertices: n });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeomError::DegenerateFace(fi));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &PointCloud {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Replaces the vertex cloud, keeping connectivity. The new cloud must
    /// have the same number of points.
    pub fn map_vertices(&self, vertices: PointCloud) -> Result<Self, GeomError> {
        if vertices.len() != self.vertices.len() {
            return Err(GeomError::AttributeMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        Ok(Self { vertices, faces: self.faces.clone() })
    }

    /// Area-weighted vertex normals from face geometry. Vertices touching no
    /// face with nonzero area keep the invalid (zero) flag.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let pts = self.vertices.points();
        let mut acc = vec![Vec3::zeros(); pts.len()];
        for f in &self.faces {
            let e1 = pts[f[1]] - pts[f[0]];
            let e2 = pts[f[2]] - pts[f[0]];
            let cross = e1.cross(&e2);
            for &v in f {
                acc[v] += cross;
            }
        }
        for n in &mut acc {
            let len = n.norm();
            *n = if len > 0.0 { *n / len } else { Vec3::zeros() };
        }
        acc
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: &[Vec3]) -> Result<Self, GeomError> {
        let first = points.first().ok_or(GeomError::EmptyCloud)?;
        let mut min = *first;
        let mut max = *first;
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Ok(Self { min, max })
    }

    pub fn from_cloud(cloud: &PointCloud) -> Result<Self, GeomError> {
        Self::from_points(cloud.points())
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// The eight corner points.
    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cloud_rejects_non_finite_coordinates() {
        let err = PointCloud::new(vec![Vec3::zeros(), Vec3::new(0.0, f64::NAN, 0.0)]);
        assert!(matches!(err, Err(GeomError::NonFinitePoint(1))));
    }

    #[test]
    fn cloud_rejects_mismatched_or_invalid_attributes() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(
            cloud.clone().with_normals(vec![Vec3::new(1.0, 0.0, 0.0)]),
            Err(GeomError::AttributeMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            cloud.clone().with_normals(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)]),
            Err(GeomError::BadNormal(1))
        ));
        assert!(matches!(
            cloud.clone().with_colors(vec![[0.0, 0.0, 0.0], [1.2, 0.0, 0.0]]),
            Err(GeomError::BadColor(1))
        ));
        // Zero normals are the valid "no normal" flag.
        assert!(cloud.with_normals(vec![Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)]).is_ok());
    }

    #[test]
    fn mesh_rejects_bad_faces() {
        let cloud = PointCloud::new(vec![
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            TriangleMesh::new(cloud.clone(), vec![[0, 1, 3]]),
            Err(GeomError::FaceIndexOutOfRange { face: 0, index: 3, vertices: 3 })
        ));
        assert!(matches!(
            TriangleMesh::new(cloud.clone(), vec![[0, 1, 1]]),
            Err(GeomError::DegenerateFace(0))
        ));
        assert!(TriangleMesh::new(cloud, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn aabb_of_empty_cloud_errors() {
        assert!(matches!(Aabb::from_points(&[]), Err(GeomError::EmptyCloud)));
    }

    /// For a cloud that contains the corners of its own bounding box, the
    /// bounds of the transformed cloud must equal the bounds of the eight
    /// transformed corners (affine maps send a box onto the hull of its
    /// corner images).
    #[test]
    fn transformed_bounds_match_transformed_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let mut pts: Vec<Vec3> = (0..60)
                .map(|_| {
                    Vec3::new(
                        rng.random::<f64>() * 4.0 - 2.0,
                        rng.random::<f64>() * 2.0,
                        rng.random::<f64>() * 9.0 - 3.0,
                    )
                })
                .collect();
            let base = Aabb::from_points(&pts).unwrap();
            pts.extend_from_slice(&base.corners());
            let cloud = PointCloud::new(pts).unwrap();

            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let axis = Vec3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
            .normalize();
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let t = SimilarityTransform::new(
                0.1 + rng.random::<f64>() * 5.0,
                Matrix3::from(rot),
                Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()),
            )
            .unwrap();

            let moved = t.apply_cloud(&cloud);
            let got = Aabb::from_cloud(&moved).unwrap();
            let corner_images: Vec<Vec3> =
                base.corners().iter().map(|&c| t.apply_point(c)).collect();
            let want = Aabb::from_points(&corner_images).unwrap();
            assert!((got.min - want.min).norm() < 1e-9, "min {:?} vs {:?}", got.min, want.min);
            assert!((got.max - want.max).norm() < 1e-9, "max {:?} vs {:?}", got.max, want.max);
        }
    }
}
