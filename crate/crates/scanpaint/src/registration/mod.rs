//! Aligning the sparse multi-view cloud to the dense scan: coarse guesses,
//! the closed-form similarity fit, iterative refinement, and transform
//! files.

mod sicp;
mod transform_io;
mod umeyama;

pub use sicp::{run_sicp, SicpConfig, SicpReport};
pub use transform_io::{parse_transform, write_transform};
pub use umeyama::similarity_from_pairs;

use thiserror::Error;

use crate::geom::{Aabb, GeomError, KdTree3, PointCloud, SimilarityTransform, Vec3};

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("insufficient correspondences: a similarity fit needs at least 3 pairs, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("correspondence source points are collinear or coincident; rotation is underdetermined")]
    DegenerateCorrespondences,
    #[error("a cloud's bounding box has zero diagonal; bounding-box alignment is undefined")]
    DegenerateBounds,
    #[error("nearest-neighbor pairs became degenerate at iteration {iteration}")]
    DegenerateIteration { iteration: usize },
    #[error("transform file line {line}: {message}")]
    TransformParse { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// Root-mean-square residual of `t` over explicit pairs.
pub fn rmse(pairs: &[(Vec3, Vec3)], t: &SimilarityTransform) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|(x, y)| (t.apply_point(*x) - y).norm_squared())
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Initial guess that matches the clouds' axis-aligned bounding boxes:
/// identity rotation, the ratio of box diagonals as scale, and the
/// translation that aligns the box centers.
pub fn coarse_align_bbox(
    source: &PointCloud,
    target: &PointCloud,
) -> Result<SimilarityTransform, RegistrationError> {
    let sb = Aabb::from_cloud(source)?;
    let tb = Aabb::from_cloud(target)?;
    let (sd, td) = (sb.diagonal(), tb.diagonal());
    if !(sd > 0.0) || !(td > 0.0) {
        return Err(RegistrationError::DegenerateBounds);
    }
    let scale = td / sd;
    let translation = tb.center() - scale * sb.center();
    Ok(SimilarityTransform::new(scale, nalgebra::Matrix3::identity(), translation)?)
}

/// Initial guess fitted to hand-picked source/target point pairs.
pub fn coarse_align_correspondences(
    pairs: &[(Vec3, Vec3)],
) -> Result<SimilarityTransform, RegistrationError> {
    similarity_from_pairs(pairs)
}

/// Builds the symmetric nearest-neighbor pair list for one refinement
/// step: every source point paired with the target point nearest to its
/// image under `t`, plus every target point paired with the source point
/// whose image is nearest to it. Pairs hold untransformed source points.
/// Duplicates stay; a pair both sides agree on simply counts twice.
pub fn symmetric_nearest_pairs(
    source: &[Vec3],
    source_tree: &KdTree3,
    target: &[Vec3],
    target_tree: &KdTree3,
    t: &SimilarityTransform,
) -> Vec<(Vec3, Vec3)> {
    use rayon::prelude::*;

    let inv = t.inverse();
    let forward = source.par_iter().map(|&x| {
        let (j, _) = target_tree.nearest(t.apply_point(x)).expect("non-empty target");
        (x, target[j])
    });
    let backward = target.par_iter().map(|&y| {
        let (i, _) = source_tree.nearest(inv.apply_point(y)).expect("non-empty source");
        (source[i], y)
    });
    forward.chain(backward).collect()
}
