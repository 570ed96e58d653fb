//! Closed-form least-squares similarity fit between paired point sets.

use nalgebra::{Matrix3, SVD};

use crate::geom::{SimilarityTransform, Vec3};

use super::RegistrationError;

/// Finds the similarity (scale, proper rotation, translation) minimizing
/// the sum of squared distances `|s R x_i + t - y_i|^2` over the pairs.
///
/// The fit is exact when the pairs really are related by a similarity.
/// A reflection-flavored cross-covariance is projected onto a proper
/// rotation by flipping the weakest singular direction. Pairs whose
/// source points are collinear (or coincident) leave the rotation
/// underdetermined and are rejected.
pub fn similarity_from_pairs(
    pairs: &[(Vec3, Vec3)],
) -> Result<SimilarityTransform, RegistrationError> {
    if pairs.len() < 3 {
        return Err(RegistrationError::InsufficientCorrespondences(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mu_x: Vec3 = pairs.iter().map(|(x, _)| x).sum::<Vec3>() / n;
    let mu_y: Vec3 = pairs.iter().map(|(_, y)| y).sum::<Vec3>() / n;

    let mut var_x = 0.0;
    let mut cross = Matrix3::zeros();
    for (x, y) in pairs {
        let dx = x - mu_x;
        let dy = y - mu_y;
        var_x += dx.norm_squared();
        cross += dy * dx.transpose();
    }
    var_x /= n;
    cross /= n;

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    if !(sv[1] > sv[0] * 1e-12) {
        return Err(RegistrationError::DegenerateCorrespondences);
    }

    let flip = if u.determinant() * v_t.determinant() < 0.0 { -1.0 } else { 1.0 };
    let rotation = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, flip)) * v_t;
    let scale = (sv[0] + sv[1] + flip * sv[2]) / var_x;
    let translation = mu_y - scale * (rotation * mu_x);
    Ok(SimilarityTransform::new(scale, rotation, translation)?)
}
