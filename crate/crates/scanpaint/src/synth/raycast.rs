//! Brute-force ray casting against a triangle mesh.
//!
//! Deliberately shares nothing with the depth-buffer rasterizer beyond the
//! camera type, so the two renderers can cross-check each other: rays are
//! intersected analytically and attributes come from true barycentric
//! coordinates at the hit point, with no screen-space interpolation.

use rayon::prelude::*;

use crate::geom::{TriangleMesh, Vec3};
use crate::imageproc::Image;
use crate::projection::Camera;

/// Closest intersection of one ray with one triangle: distance along the
/// ray plus the barycentric weights of the far two vertices.
fn intersect(orig: Vec3, dir: Vec3, v0: Vec3, v1: Vec3, v2: Vec3) -> Option<(f64, f64, f64)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = orig - v0;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > 1e-12).then_some((t, u, v))
}

/// Renders the mesh's vertex colors by casting one ray per pixel center.
/// Assumes a distortion-free camera.
pub fn raycast_image(mesh: &TriangleMesh, cam: &Camera, background: [f64; 3]) -> Image {
    assert_eq!((cam.k1(), cam.k2()), (0.0, 0.0), "ray casting ignores distortion");
    let (w, h) = (cam.width(), cam.height());
    let (cx, cy) = cam.principal_point();
    let origin = cam.center();
    let cam_to_world = cam.rotation().transpose();
    let points = mesh.vertices().points();
    let fallback = [0.0; 3];
    let colors = mesh.vertices().colors();

    let pixels: Vec<[f64; 3]> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (px, py) = ((i % w) as f64, (i / w) as f64);
            let dir_cam = Vec3::new((px - cx) / cam.focal(), (py - cy) / cam.focal(), 1.0);
            let dir = cam_to_world * dir_cam;

            let mut best: Option<(f64, usize, f64, f64)> = None;
            for (fi, face) in mesh.faces().iter().enumerate() {
                let (v0, v1, v2) = (points[face[0]], points[face[1]], points[face[2]]);
                if let Some((t, u, v)) = intersect(origin, dir, v0, v1, v2) {
                    if best.is_none_or(|b| t < b.0) {
                        best = Some((t, fi, u, v));
                    }
                }
            }
            match best {
                None => background,
                Some((_, fi, u, v)) => {
                    let face = mesh.faces()[fi];
                    let cs = face.map(|vi| colors.map_or(fallback, |c| c[vi]));
                    let w0 = 1.0 - u - v;
                    [0, 1, 2].map(|ch| {
                        (w0 * cs[0][ch] + u * cs[1][ch] + v * cs[2][ch]).clamp(0.0, 1.0)
                    })
                }
            }
        })
        .collect();
    Image::new(w, h, pixels).expect("raster-sized buffer")
}
