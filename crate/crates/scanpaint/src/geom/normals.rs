use nalgebra::Matrix3;
use rayon::prelude::*;

use super::{GeomError, KdTree3, PointCloud, Vec3};

/// Ratio below which the middle covariance eigenvalue counts as zero,
/// flagging a neighborhood with no usable surface orientation.
const RANK_TOL: f64 = 1e-9;

/// Per-point normals from the covariance of the `k` nearest neighbors.
///
/// Each point's neighborhood is the point itself plus its `k` nearest other
/// points; the normal is the eigenvector of the smallest covariance
/// eigenvalue. Neighborhoods whose points are (numerically) collinear or
/// coincident carry no orientation, and those points receive the zero
/// invalid-normal flag instead.
///
/// With a `viewpoint`, normals are flipped to face it: `n · (viewpoint − p)
/// ≥ 0`. Without one, the eigensolver's sign is kept as-is, which is
/// deterministic but not consistent across a surface.
///
/// Requires `k ≥ 3` and at least `k + 1` points. Existing colors are kept;
/// existing normals are replaced.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    viewpoint: Option<Vec3>,
) -> Result<PointCloud, GeomError> {
    if k < 3 {
        return Err(GeomError::NeighborhoodTooSmall(k));
    }
    if cloud.len() < k + 1 {
        return Err(GeomError::InsufficientPoints { k, got: cloud.len() });
    }
    let points = cloud.points();
    let tree = KdTree3::build(points);
    let normals: Vec<Vec3> = points
        .par_iter()
        .map(|&p| {
            let neighborhood = tree.k_nearest(p, k + 1);
            let mut normal = covariance_normal(points, &neighborhood);
            if let (Some(v), true) = (viewpoint, normal != Vec3::zeros()) {
                if normal.dot(&(v - p)) < 0.0 {
                    normal = -normal;
                }
            }
            normal
        })
        .collect();

    let mut out = PointCloud::new(points.to_vec()).expect("validated cloud");
    if let Some(colors) = cloud.colors() {
        out = out.with_colors(colors.to_vec()).expect("validated colors");
    }
    out.with_normals(normals)
}

fn covariance_normal(points: &[Vec3], neighborhood: &[(usize, f64)]) -> Vec3 {
    let m = neighborhood.len() as f64;
    let mut mean = Vec3::zeros();
    for &(i, _) in neighborhood {
        mean += points[i];
    }
    mean /= m;
    let mut cov = Matrix3::zeros();
    for &(i, _) in neighborhood {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    cov /= m;

    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let (low, mid, high) = (eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
    debug_assert!(low <= mid && mid <= high);
    if high <= 0.0 || mid <= RANK_TOL * high {
        return Vec3::zeros();
    }
    let n = eig.eigenvectors.column(idx[0]).into_owned();
    let len = n.norm();
    if len == 0.0 {
        return Vec3::zeros();
    }
    n / len
}
