//! Scoring a pipeline run against the generating ground truth.

use crate::colorize::DisplacementRecord;
use crate::geom::SimilarityTransform;
use crate::imageproc::{rgb_to_ycbcr, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformErrors {
    /// `|s - s*| / s*`.
    pub scale_rel: f64,
    /// Geodesic angle between the rotations, radians.
    pub rotation_radians: f64,
    /// Euclidean gap between the translations.
    pub translation: f64,
}

pub fn transform_errors(
    got: &SimilarityTransform,
    truth: &SimilarityTransform,
) -> TransformErrors {
    let rel = got.rotation() * truth.rotation().transpose();
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    TransformErrors {
        scale_rel: (got.scale() - truth.scale()).abs() / truth.scale(),
        rotation_radians: cos.acos(),
        translation: (got.translation() - truth.translation()).norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScore {
    /// Painted points, then points left at the sentinel color.
    pub colored: usize,
    pub uncolored: usize,
    /// Mean and 95th percentile of the per-point error, where a point's
    /// error is its worst channel deviation. Infinite when nothing was
    /// painted.
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
}

pub fn score_colors(got: &[[f64; 3]], colored: &[bool], truth: &[[f64; 3]]) -> ColorScore {
    assert_eq!(got.len(), truth.len());
    assert_eq!(got.len(), colored.len());
    let mut errs: Vec<f64> = colored
        .iter()
        .zip(got.iter().zip(truth))
        .filter(|(&c, _)| c)
        .map(|(_, (g, t))| (0..3).map(|ch| (g[ch] - t[ch]).abs()).fold(0.0, f64::max))
        .collect();
    let colored_n = errs.len();
    if colored_n == 0 {
        return ColorScore {
            colored: 0,
            uncolored: got.len(),
            mean: f64::INFINITY,
            p95: f64::INFINITY,
            max: f64::INFINITY,
        };
    }
    errs.sort_by(|a, b| a.partial_cmp(b).expect("finite color errors"));
    let p95_idx = ((colored_n as f64 * 0.95).ceil() as usize).clamp(1, colored_n) - 1;
    ColorScore {
        colored: colored_n,
        uncolored: got.len() - colored_n,
        mean: errs.iter().sum::<f64>() / colored_n as f64,
        p95: errs[p95_idx],
        max: *errs.last().expect("non-empty"),
    }
}

/// Standard deviation of the luma channel over the block centered at
/// `center` (edge-clamped), on the 0..255 luma scale. Low values mean the
/// block carries no texture for matching to lock onto.
pub fn block_y_stddev(photo: &Image, center: (i64, i64), side: usize) -> f64 {
    let half = (side / 2) as i64;
    let n = (side * side) as f64;
    let mut lumas = Vec::with_capacity(side * side);
    for dy in -half..=half {
        for dx in -half..=half {
            lumas.push(rgb_to_ycbcr(photo.get_clamped(center.0 + dx, center.1 + dy))[0]);
        }
    }
    let mean = lumas.iter().sum::<f64>() / n;
    (lumas.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisplacementScore {
    /// Corrections recorded against the inspected candidate image.
    pub total: usize,
    /// Of those, corrections whose reference block carries texture.
    pub textured: usize,
    /// Of the textured ones, corrections within one pixel of expected.
    pub within_one: usize,
}

impl DisplacementScore {
    pub fn recovery_fraction(&self) -> f64 {
        if self.textured == 0 {
            return 0.0;
        }
        self.within_one as f64 / self.textured as f64
    }
}

/// Compares every correction targeting `candidate_image` to the known
/// expected offset. Corrections anchored on featureless reference blocks
/// (luma stddev below `min_y_stddev`) are counted but not judged: with
/// nothing to match, any offset is as good as another.
pub fn score_displacements(
    records: &[DisplacementRecord],
    candidate_image: usize,
    expected: (i32, i32),
    photos: &[Image],
    block_size: usize,
    min_y_stddev: f64,
) -> DisplacementScore {
    let mut score = DisplacementScore { total: 0, textured: 0, within_one: 0 };
    for r in records.iter().filter(|r| r.candidate_image == candidate_image) {
        score.total += 1;
        let spread =
            block_y_stddev(&photos[r.reference_image], (r.ref_x, r.ref_y), block_size);
        if spread < min_y_stddev {
            continue;
        }
        score.textured += 1;
        if (r.dx - expected.0).abs() <= 1 && (r.dy - expected.1).abs() <= 1 {
            score.within_one += 1;
        }
    }
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use nalgebra::Rotation3;

    #[test]
    fn transform_errors_measure_each_component() {
        let truth = SimilarityTransform::new(
            2.0,
            Rotation3::from_axis_angle(&Vec3::y_axis(), 0.4).into_inner(),
            Vec3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let got = SimilarityTransform::new(
            2.1,
            Rotation3::from_axis_angle(&Vec3::y_axis(), 0.45).into_inner(),
            Vec3::new(1.0, 2.0, 3.5),
        )
        .unwrap();
        let e = transform_errors(&got, &truth);
        assert!((e.scale_rel - 0.05).abs() < 1e-12);
        assert!((e.rotation_radians - 0.05).abs() < 1e-9);
        assert!((e.translation - 0.5).abs() < 1e-12);
        let zero = transform_errors(&truth, &truth);
        assert!(zero.scale_rel == 0.0 && zero.translation == 0.0);
        assert!(zero.rotation_radians < 1e-7);
    }

    #[test]
    fn color_score_splits_percentiles_and_uncolored() {
        let truth = vec![[0.5, 0.5, 0.5]; 20];
        let mut got = truth.clone();
        let mut colored = vec![true; 20];
        got[0] = [0.5, 0.5, 0.9];
        colored[19] = false;
        let s = score_colors(&got, &colored, &truth);
        assert_eq!((s.colored, s.uncolored), (19, 1));
        assert!((s.max - 0.4).abs() < 1e-12);
        assert!((s.mean - 0.4 / 19.0).abs() < 1e-12);
        // 19 values: p95 index ceil(18.05) - 1 = 18, the largest.
        assert_eq!(s.p95, s.max);
    }

    #[test]
    fn flat_blocks_have_no_spread_and_are_excluded() {
        let flat = Image::filled(20, 20, [0.4, 0.4, 0.4]).unwrap();
        assert!(block_y_stddev(&flat, (10, 10), 7) < 1e-9);
        let noisy = Image::new(
            20,
            20,
            (0..400).map(|i| if i % 2 == 0 { [0.9; 3] } else { [0.1; 3] }).collect(),
        )
        .unwrap();
        assert!(block_y_stddev(&noisy, (10, 10), 7) > 50.0);

        let mk = |dx| DisplacementRecord {
            point: 0,
            reference_image: 0,
            candidate_image: 1,
            ref_x: 10,
            ref_y: 10,
            dx,
            dy: 0,
            error: 0.0,
        };
        let records = vec![mk(4), mk(9)];
        let flat_score = score_displacements(&records, 1, (4, 0), &[flat], 7, 1.0);
        assert_eq!(flat_score, DisplacementScore { total: 2, textured: 0, within_one: 0 });
        let noisy_score = score_displacements(&records, 1, (4, 0), &[noisy], 7, 1.0);
        assert_eq!(noisy_score, DisplacementScore { total: 2, textured: 2, within_one: 1 });
    }
}
