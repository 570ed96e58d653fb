//! Painting photographic color onto scan points.
//!
//! Each point is projected into every photo; views where it is occluded,
//! off-frame, or masked out contribute nothing. The surviving views are
//! ranked by mask weight and the best few are blended. Before blending,
//! every non-reference view is locally re-aligned to the best view by
//! block matching, compensating the small reprojection drift left over
//! after registration.

mod displace;

pub use displace::{find_displacement, Displacement};

use rayon::prelude::*;

use crate::geom::Vec3;
use crate::imageproc::Image;
use crate::projection::{Camera, DepthMap, QualityMask};

/// Color given to points no photo can see.
pub const UNCOLORED: [f64; 3] = [0.5, 0.5, 0.5];

/// Everything the painter needs about one photograph.
#[derive(Debug, Clone)]
pub struct ImageContext {
    pub camera: Camera,
    pub photo: Image,
    pub mask: QualityMask,
    pub depth: DepthMap,
}

#[derive(Debug, Clone)]
pub struct ColorizeParams {
    pub best_k: usize,
    pub block_size: usize,
    pub search_radius: usize,
    /// Depth slack when testing whether a point is the visible surface.
    pub visibility_epsilon: f64,
    /// Disable to blend at the raw projections (useful for comparisons).
    pub correction: bool,
}

impl Default for ColorizeParams {
    fn default() -> Self {
        Self {
            best_k: 3,
            block_size: 7,
            search_radius: 15,
            visibility_epsilon: 1e-6,
            correction: true,
        }
    }
}

/// One usable sighting of a point in one photo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub image: usize,
    pub u: f64,
    pub v: f64,
    /// Mask weight at the rounded pixel; always positive.
    pub weight: f64,
}

/// A block-matching correction applied to one point in one candidate view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementRecord {
    pub point: usize,
    pub reference_image: usize,
    pub candidate_image: usize,
    /// Pixel the reference block was anchored at.
    pub ref_x: i64,
    pub ref_y: i64,
    pub dx: i32,
    pub dy: i32,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Candidate blocks scored across the whole cloud.
    pub blocks_evaluated: u64,
    /// Largest per-point block count, for checking the search stays local.
    pub max_blocks_per_point: u64,
    pub corrected_pairs: u64,
    pub multi_view_points: u64,
    pub single_view_points: u64,
}

#[derive(Debug, Clone)]
pub struct ColorizeResult {
    pub colors: Vec<[f64; 3]>,
    pub colored: Vec<bool>,
    pub records: Vec<DisplacementRecord>,
    /// Corrections binned by Chebyshev magnitude `max(|dx|, |dy|)`.
    pub displacement_histogram: Vec<u64>,
    pub work: WorkCounters,
}

/// Collects the views that actually see `p`: projected in front of the
/// camera, landing on a pixel whose rendered depth matches the point's,
/// with positive mask weight. The weight is sampled bilinearly at the
/// continuous projection, so a point whose footprint straddles a
/// zero-weight pixel still picks up support from its neighbors.
pub fn observe_point(p: Vec3, contexts: &[ImageContext], eps: f64) -> Vec<Observation> {
    let mut obs = Vec::new();
    for (image, ctx) in contexts.iter().enumerate() {
        let Some(proj) = ctx.camera.project(p) else { continue };
        let (x, y) = proj.pixel();
        if x < 0 || y < 0 || x >= ctx.mask.width() as i64 || y >= ctx.mask.height() as i64 {
            continue;
        }
        if proj.depth > ctx.depth.get(x as usize, y as usize) + eps {
            continue;
        }
        let weight = ctx.mask.sample_bilinear(proj.u, proj.v);
        if weight > 0.0 {
            obs.push(Observation { image, u: proj.u, v: proj.v, weight });
        }
    }
    obs
}

/// Keeps the `k` highest-weight observations, ties going to the lower
/// image index; the result is ordered best first.
pub fn select_best(mut obs: Vec<Observation>, k: usize) -> Vec<Observation> {
    obs.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .expect("mask weights are finite")
            .then(a.image.cmp(&b.image))
    });
    obs.truncate(k);
    obs
}

struct PointOutcome {
    color: [f64; 3],
    colored: bool,
    records: Vec<DisplacementRecord>,
    blocks: u64,
    views: usize,
}

fn paint_point(
    index: usize,
    p: Vec3,
    contexts: &[ImageContext],
    params: &ColorizeParams,
) -> PointOutcome {
    let obs = select_best(
        observe_point(p, contexts, params.visibility_epsilon),
        params.best_k,
    );
    if obs.is_empty() {
        return PointOutcome {
            color: UNCOLORED,
            colored: false,
            records: Vec::new(),
            blocks: 0,
            views: 0,
        };
    }

    let reference = obs[0];
    let ref_ctx = &contexts[reference.image];
    let ref_center = (reference.u.round() as i64, reference.v.round() as i64);

    let mut records = Vec::new();
    let mut blocks = 0;
    let mut acc = [0.0; 3];
    let mut weight_sum = 0.0;
    for o in &obs {
        let ctx = &contexts[o.image];
        let mut du = 0.0;
        let mut dv = 0.0;
        if params.correction && o.image != reference.image {
            let cand_center = (o.u.round() as i64, o.v.round() as i64);
            if let Some(d) = find_displacement(
                &ref_ctx.photo,
                ref_center,
                &ctx.photo,
                cand_center,
                params.block_size,
                params.search_radius as i32,
            ) {
                blocks += d.evaluated;
                records.push(DisplacementRecord {
                    point: index,
                    reference_image: reference.image,
                    candidate_image: o.image,
                    ref_x: ref_center.0,
                    ref_y: ref_center.1,
                    dx: d.dx,
                    dy: d.dy,
                    error: d.error,
                });
                du = d.dx as f64;
                dv = d.dy as f64;
            }
        }
        let c = ctx.photo.sample_bilinear(o.u + du, o.v + dv);
        for ch in 0..3 {
            acc[ch] += o.weight * c[ch];
        }
        weight_sum += o.weight;
    }

    PointOutcome {
        color: acc.map(|v| v / weight_sum),
        colored: true,
        records,
        blocks,
        views: obs.len(),
    }
}

/// Paints every point, in parallel but with a deterministic result.
pub fn colorize_cloud(
    points: &[Vec3],
    contexts: &[ImageContext],
    params: &ColorizeParams,
) -> ColorizeResult {
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| paint_point(i, p, contexts, params))
        .collect();

    let mut result = ColorizeResult {
        colors: Vec::with_capacity(points.len()),
        colored: Vec::with_capacity(points.len()),
        records: Vec::new(),
        displacement_histogram: vec![0; params.search_radius + 1],
        work: WorkCounters::default(),
    };
    for out in outcomes {
        result.colors.push(out.color);
        result.colored.push(out.colored);
        result.work.blocks_evaluated += out.blocks;
        result.work.max_blocks_per_point = result.work.max_blocks_per_point.max(out.blocks);
        result.work.corrected_pairs += out.records.len() as u64;
        match out.views {
            0 => {}
            1 => result.work.single_view_points += 1,
            _ => result.work.multi_view_points += 1,
        }
        for r in &out.records {
            let mag = r.dx.unsigned_abs().max(r.dy.unsigned_abs()) as usize;
            result.displacement_histogram[mag.min(params.search_radius)] += 1;
        }
        result.records.extend(out.records);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{PointCloud, TriangleMesh};
    use crate::projection::{render_depth_map, Surface};
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_mesh(z: f64) -> TriangleMesh {
        let pts = vec![
            Vec3::new(-2.0, -2.0, z),
            Vec3::new(2.0, -2.0, z),
            Vec3::new(2.0, 2.0, z),
            Vec3::new(-2.0, 2.0, z),
        ];
        TriangleMesh::new(PointCloud::new(pts).unwrap(), vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn all_ones_mask(w: usize, h: usize) -> QualityMask {
        QualityMask::new(w, h, vec![1.0; w * h]).unwrap()
    }

    fn front_camera(w: usize, h: usize) -> Camera {
        Camera::simple(60.0, Matrix3::identity(), Vec3::zeros(), w, h).unwrap()
    }

    fn noisy_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pixels = (0..w * h)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        Image::new(w, h, pixels).unwrap()
    }

    fn context_with_photo(photo: Image) -> ImageContext {
        let cam = front_camera(photo.width(), photo.height());
        let depth = render_depth_map(Surface::Mesh(&plane_mesh(2.0)), &cam);
        ImageContext {
            mask: all_ones_mask(photo.width(), photo.height()),
            camera: cam,
            photo,
            depth,
        }
    }

    #[test]
    fn selection_orders_by_weight_then_image_index() {
        let mk = |image, weight| Observation { image, u: 0.0, v: 0.0, weight };
        let picked = select_best(vec![mk(0, 0.5), mk(1, 0.9), mk(2, 0.9), mk(3, 0.1)], 3);
        let ids: Vec<usize> = picked.iter().map(|o| o.image).collect();
        assert_eq!(ids, vec![1, 2, 0]);
    }

    #[test]
    fn constant_photos_paint_their_color_and_hide_occluded_points() {
        let color = [0.2, 0.4, 0.8];
        let contexts = vec![ImageContext {
            photo: Image::filled(100, 100, color).unwrap(),
            ..context_with_photo(Image::filled(100, 100, color).unwrap())
        }];
        let points = vec![
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(0.5, -0.3, 2.0),
            Vec3::new(0.0, 0.0, 3.5),
        ];
        let out = colorize_cloud(&points, &contexts, &ColorizeParams::default());
        for ch in 0..3 {
            assert!((out.colors[0][ch] - color[ch]).abs() < 1e-12);
            assert!((out.colors[1][ch] - color[ch]).abs() < 1e-12);
        }
        assert!(out.colored[0] && out.colored[1]);
        assert!(!out.colored[2], "point behind the plane must stay unpainted");
        assert_eq!(out.colors[2], UNCOLORED);
        assert_eq!(out.work.single_view_points, 2);
        assert_eq!(out.work.blocks_evaluated, 0);
    }

    #[test]
    fn correction_recovers_a_pure_image_shift() {
        // Same camera pose twice, but the second photo's content sits two
        // pixels to the right: sampling it at the raw projection reads the
        // wrong surface, while the corrected offset restores agreement.
        let base = noisy_image(100, 100, 7);
        let shifted_pixels = (0..100usize * 100)
            .map(|i| {
                let (x, y) = (i % 100, i / 100);
                base.get(x.saturating_sub(2), y)
            })
            .collect();
        let shifted = Image::new(100, 100, shifted_pixels).unwrap();
        let contexts = vec![
            context_with_photo(base.clone()),
            context_with_photo(shifted),
        ];
        // Make view 0 the reference by thinning the second mask slightly.
        let mut weights = vec![0.9; 100 * 100];
        weights[0] = 0.89;
        let contexts = {
            let mut c = contexts;
            c[1].mask = QualityMask::new(100, 100, weights).unwrap();
            c
        };

        let points: Vec<Vec3> = (0..5)
            .map(|i| Vec3::new(-0.4 + 0.2 * i as f64, 0.1, 2.0))
            .collect();

        let corrected = colorize_cloud(&points, &contexts, &ColorizeParams::default());
        let raw = colorize_cloud(
            &points,
            &contexts,
            &ColorizeParams { correction: false, ..ColorizeParams::default() },
        );

        for r in &corrected.records {
            assert_eq!((r.dx, r.dy), (2, 0));
            assert_eq!(r.error, 0.0);
        }
        assert_eq!(corrected.records.len(), points.len());
        assert_eq!(corrected.displacement_histogram[2], points.len() as u64);

        let gap = |a: [f64; 3], b: [f64; 3]| {
            (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)
        };
        for (i, &p) in points.iter().enumerate() {
            let truth = {
                let proj = contexts[0].camera.project(p).unwrap();
                contexts[0].photo.sample_bilinear(proj.u, proj.v)
            };
            assert!(gap(corrected.colors[i], truth) < 1e-9, "point {i} off after correction");
            assert!(gap(raw.colors[i], truth) > 0.01, "shift should corrupt raw blending");
        }

        let per_pair_cap = (2 * 15 + 1) * (2 * 15 + 1);
        assert!(corrected.work.max_blocks_per_point <= per_pair_cap as u64 * 2);
        assert_eq!(raw.work.blocks_evaluated, 0);
    }

    #[test]
    fn weights_blend_views_proportionally() {
        let red = Image::filled(50, 50, [1.0, 0.0, 0.0]).unwrap();
        let blue = Image::filled(50, 50, [0.0, 0.0, 1.0]).unwrap();
        let mut a = context_with_photo(red);
        let mut b = context_with_photo(blue);
        a.mask = QualityMask::new(50, 50, vec![0.75; 2500]).unwrap();
        b.mask = QualityMask::new(50, 50, vec![0.25; 2500]).unwrap();
        let out = colorize_cloud(
            &[Vec3::new(0.0, 0.0, 2.0)],
            &[a, b],
            &ColorizeParams { correction: false, ..ColorizeParams::default() },
        );
        assert!((out.colors[0][0] - 0.75).abs() < 1e-12);
        assert!((out.colors[0][2] - 0.25).abs() < 1e-12);
        assert_eq!(out.work.multi_view_points, 1);
    }
}
