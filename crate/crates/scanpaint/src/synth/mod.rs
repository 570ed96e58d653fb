//! Synthetic scenes with exact ground truth.
//!
//! A scene is a textured surface (the "scan"), a ring of cameras with
//! rendered photos, and a multi-view reconstruction of the same surface
//! expressed in its own coordinate frame, a known similarity away from
//! the scan's frame. Running the pipeline on the written files and
//! comparing against the stored truth exercises registration, masking,
//! displacement correction, and blending end to end.

mod eval;
mod raycast;

pub use eval::{
    block_y_stddev, score_colors, score_displacements, transform_errors, ColorScore,
    DisplacementScore, TransformErrors,
};
pub use raycast::raycast_image;

use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{Aabb, GeomError, PointCloud, SimilarityTransform, TriangleMesh, Vec3};
use crate::imageproc::Image;
use crate::ingest::{
    save_image, write_bundler, write_ply, BundlerReconstruction, BundlerView, IngestError,
    PlyEncoding, PlyGeometry,
};
use crate::projection::{
    is_visible, render_gbuffer, Camera, DepthMap, GeometryBuffer, ProjectionError, Surface,
};
use crate::registration::write_transform;

/// Photo background where no geometry is visible.
pub const BACKGROUND: [f64; 3] = [0.06, 0.06, 0.07];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Sphere,
    /// Closed surface of revolution with a bulging profile.
    Vase,
    /// Ground plane; the only open shape.
    Plane,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Vase => "vase",
            Shape::Plane => "plane",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub shape: Shape,
    /// Vertices around the axis (cells per side for the plane).
    pub segments: usize,
    /// Subdivisions along the axis (cells per side for the plane).
    pub rings: usize,
    /// Radial vertex displacement amplitude; breaks the rotational
    /// symmetry that would otherwise leave registration underdetermined.
    pub jitter: f64,
    pub cameras: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub camera_distance: f64,
    /// Every n-th vertex becomes a reconstruction point.
    pub sparse_stride: usize,
    /// Append one unusable (all-zero) camera to the reconstruction.
    pub decoy_camera: bool,
    pub seed: u64,
    /// Similarity carrying reconstruction coordinates into scan
    /// coordinates; the pipeline's registration step must recover it.
    pub truth: SimilarityTransform,
}

/// A generated scene held in memory.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// The scan surface, in scan coordinates, with ground-truth colors.
    pub mesh: TriangleMesh,
    /// Physical cameras in scan coordinates, one per photo.
    pub cameras: Vec<Camera>,
    pub photos: Vec<Image>,
    pub depths: Vec<DepthMap>,
    /// The reconstruction's points in scan coordinates.
    pub sparse_world: PointCloud,
    pub truth: SimilarityTransform,
    /// What the multi-view reconstruction believes, in its own frame.
    pub recon: BundlerReconstruction,
}

/// Named baseline configurations. `truth` starts at identity; callers
/// overwrite it to pose the reconstruction frame.
pub fn preset(name: &str, seed: u64) -> Option<SceneSpec> {
    let spec = |shape, segments, rings, cameras, width, height, focal, dist, stride, decoy| {
        SceneSpec {
            shape,
            segments,
            rings,
            jitter: 0.012,
            cameras,
            width,
            height,
            focal,
            camera_distance: dist,
            sparse_stride: stride,
            decoy_camera: decoy,
            seed,
            truth: SimilarityTransform::identity(),
        }
    };
    match name {
        "desk" => Some(spec(Shape::Vase, 100, 50, 40, 640, 480, 600.0, 4.2, 1, false)),
        "sphere" => Some(spec(Shape::Sphere, 64, 32, 4, 320, 240, 260.0, 3.5, 2, true)),
        "plane" => Some(spec(Shape::Plane, 40, 40, 3, 320, 240, 260.0, 3.0, 1, false)),
        _ => None,
    }
}

/// Deterministic random similarity, scale log-uniform in
/// `[min_scale, max_scale]`.
pub fn random_similarity(
    rng: &mut ChaCha8Rng,
    min_scale: f64,
    max_scale: f64,
) -> SimilarityTransform {
    let axis = loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        if v.norm_squared() > 1e-4 {
            break nalgebra::Unit::new_normalize(v);
        }
    };
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let scale = min_scale * (max_scale / min_scale).powf(rng.random::<f64>());
    let translation = Vec3::new(
        rng.random::<f64>() * 10.0 - 5.0,
        rng.random::<f64>() * 10.0 - 5.0,
        rng.random::<f64>() * 10.0 - 5.0,
    );
    SimilarityTransform::new(
        scale,
        nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner(),
        translation,
    )
    .expect("axis-angle rotation is orthonormal")
}

/// World-to-camera pose looking from `eye` toward `target`.
pub fn look_at_camera(
    eye: Vec3,
    target: Vec3,
    up: Vec3,
    focal: f64,
    width: usize,
    height: usize,
) -> Result<Camera, ProjectionError> {
    let rz = (target - eye).normalize();
    let rx = rz.cross(&up).normalize();
    let ry = rz.cross(&rx);
    let rotation = Matrix3::new(
        rx.x, rx.y, rx.z,
        ry.x, ry.y, ry.z,
        rz.x, rz.y, rz.z,
    );
    Camera::simple(focal, rotation, -(rotation * eye), width, height)
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (mesh, texture) = build_mesh(spec, &mut rng)?;
    let cameras = camera_ring(spec)?;

    let mut photos = Vec::with_capacity(cameras.len());
    let mut depths = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let gbuf = render_gbuffer(Surface::Mesh(&mesh), cam);
        photos.push(shade_photo(&gbuf, spec.shape, &texture));
        depths.push(gbuf.depth);
    }

    let points = mesh.vertices().points();
    let colors = mesh.vertices().colors().expect("generated mesh is colored");
    let sparse_idx: Vec<usize> = (0..points.len()).step_by(spec.sparse_stride).collect();
    let eps = 1e-3 * Aabb::from_points(points)?.diagonal();

    let mut views = Vec::with_capacity(sparse_idx.len());
    for (keypoint, &vi) in sparse_idx.iter().enumerate() {
        let p = points[vi];
        let mut list = Vec::new();
        for (ci, cam) in cameras.iter().enumerate() {
            if !is_visible(p, cam, &depths[ci], eps) {
                continue;
            }
            let proj = cam.project(p).expect("visible point is in front");
            let (cx, cy) = cam.principal_point();
            list.push(BundlerView {
                camera: ci,
                keypoint: keypoint as i64,
                x: proj.u - cx,
                y: cy - proj.v,
            });
        }
        views.push(list);
    }

    let sparse_world = PointCloud::new(sparse_idx.iter().map(|&i| points[i]).collect())?
        .with_colors(sparse_idx.iter().map(|&i| colors[i]).collect())?;

    let inv = spec.truth.inverse();
    let mut recon_cameras: Vec<Option<Camera>> =
        cameras.iter().map(|c| Some(c.transformed(&inv))).collect();
    if spec.decoy_camera {
        recon_cameras.push(None);
    }
    let recon = BundlerReconstruction {
        cameras: recon_cameras,
        sparse: inv.apply_cloud(&sparse_world),
        views,
    };

    Ok(Scene {
        spec: spec.clone(),
        mesh,
        cameras,
        photos,
        depths,
        sparse_world,
        truth: spec.truth.clone(),
        recon,
    })
}

/// Same scene, but the reconstruction now believes camera `camera`'s
/// principal point sits `(dx, dy)` pixels from where it really is, the
/// classic calibration drift the displacement correction must absorb.
pub fn shift_principal(scene: &Scene, camera: usize, dx: f64, dy: f64) -> Scene {
    let mut out = scene.clone();
    out.recon.cameras[camera] = out.recon.cameras[camera]
        .take()
        .map(|c| c.with_principal_shift(dx, dy));
    out
}

/// Ways the reconstruction can be wrong about the scene. Each mode
/// corrupts only the reconstruction's beliefs; the scan, the photos and
/// the stored ground truth stay intact, so runs on a perturbed scene can
/// still be scored exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Move one believed camera's principal point by whole pixels.
    PrincipalShift { camera: usize, dx: f64, dy: f64 },
    /// Tilt one believed camera about its center by this angle, around a
    /// seed-chosen axis.
    CameraRotation { camera: usize, milliradians: f64 },
    /// Re-pose the whole reconstruction frame by a fresh random
    /// similarity, scale drawn log-uniformly from this range.
    CloudSimilarity { min_scale: f64, max_scale: f64 },
    /// Independent Gaussian noise on every sparse point coordinate.
    PointNoise { sigma: f64 },
}

/// Applies one perturbation, deterministically in `seed`.
pub fn perturb_scene(scene: &Scene, mode: Perturbation, seed: u64) -> Result<Scene, SynthError> {
    let camera_in_range = |camera: usize| {
        if camera >= scene.recon.cameras.len() {
            return Err(SynthError::BadSpec(format!(
                "camera {camera} does not exist; the reconstruction has {}",
                scene.recon.cameras.len()
            )));
        }
        Ok(())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        Perturbation::PrincipalShift { camera, dx, dy } => {
            camera_in_range(camera)?;
            Ok(shift_principal(scene, camera, dx, dy))
        }
        Perturbation::CameraRotation { camera, milliradians } => {
            camera_in_range(camera)?;
            let mut out = scene.clone();
            out.recon.cameras[camera] = out.recon.cameras[camera]
                .take()
                .map(|c| tilt_camera(&c, milliradians, &mut rng))
                .transpose()?;
            Ok(out)
        }
        Perturbation::CloudSimilarity { min_scale, max_scale } => {
            if !(min_scale > 0.0 && max_scale >= min_scale) {
                return Err(SynthError::BadSpec(format!(
                    "scale range [{min_scale}, {max_scale}] is not a positive interval"
                )));
            }
            let truth = random_similarity(&mut rng, min_scale, max_scale);
            Ok(reframe(scene, &truth))
        }
        Perturbation::PointNoise { sigma } => {
            if !(sigma >= 0.0) {
                return Err(SynthError::BadSpec(format!("noise sigma {sigma} is negative")));
            }
            let mut out = scene.clone();
            if sigma == 0.0 {
                return Ok(out);
            }
            let noisy: Vec<Vec3> = out
                .recon
                .sparse
                .points()
                .iter()
                .map(|&p| p + sigma * gaussian3(&mut rng))
                .collect();
            let mut cloud = PointCloud::new(noisy)?;
            if let Some(colors) = out.recon.sparse.colors() {
                cloud = cloud.with_colors(colors.to_vec())?;
            }
            out.recon.sparse = cloud;
            Ok(out)
        }
    }
}

/// Moves the reconstruction into a different coordinate frame, updating
/// the stored truth to match. Believed cameras keep any perturbation they
/// already carry.
fn reframe(scene: &Scene, truth: &SimilarityTransform) -> Scene {
    let delta = truth.inverse().compose(&scene.truth);
    let mut out = scene.clone();
    out.recon.cameras = scene
        .recon
        .cameras
        .iter()
        .map(|c| c.as_ref().map(|c| c.transformed(&delta)))
        .collect();
    out.recon.sparse = delta.apply_cloud(&scene.recon.sparse);
    out.truth = truth.clone();
    out.spec.truth = truth.clone();
    out
}

fn tilt_camera(cam: &Camera, milliradians: f64, rng: &mut ChaCha8Rng) -> Result<Camera, SynthError> {
    if milliradians == 0.0 {
        return Ok(cam.clone());
    }
    let axis = loop {
        let v = gaussian3(rng);
        if v.norm_squared() > 1e-4 {
            break nalgebra::Unit::new_normalize(v);
        }
    };
    let tilt = nalgebra::Rotation3::from_axis_angle(&axis, milliradians / 1000.0).into_inner();
    let (cx, cy) = cam.principal_point();
    Ok(Camera::new(
        cam.focal(),
        cam.k1(),
        cam.k2(),
        tilt * cam.rotation(),
        tilt * cam.translation(),
        cam.width(),
        cam.height(),
        cx,
        cy,
    )?)
}

/// Standard normal sample in each coordinate (Box-Muller).
fn gaussian3(rng: &mut ChaCha8Rng) -> Vec3 {
    let mut pair = || {
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = std::f64::consts::TAU * v;
        (r * theta.cos(), r * theta.sin())
    };
    let (a, b) = pair();
    let (c, _) = pair();
    Vec3::new(a, b, c)
}

/// Writes the scene as the on-disk layout the command line consumes:
/// `scan.ply`, `bundle.out`, `images/img_NNN.png`, plus `truth/` with the
/// generating transform and colored surface, and a `scene.toml` summary.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("truth"))?;

    let bare = TriangleMesh::new(
        PointCloud::new(scene.mesh.vertices().points().to_vec())?,
        scene.mesh.faces().to_vec(),
    )?;
    std::fs::write(
        dir.join("scan.ply"),
        write_ply(&PlyGeometry::Mesh(bare), PlyEncoding::BinaryLittleEndian),
    )?;
    std::fs::write(
        dir.join("truth").join("colors.ply"),
        write_ply(&PlyGeometry::Mesh(scene.mesh.clone()), PlyEncoding::BinaryLittleEndian),
    )?;
    std::fs::write(dir.join("truth").join("transform.txt"), write_transform(&scene.truth))?;
    std::fs::write(dir.join("bundle.out"), write_bundler(&scene.recon))?;

    let black = Image::filled(scene.spec.width, scene.spec.height, [0.0; 3])
        .expect("positive dimensions");
    for i in 0..scene.recon.cameras.len() {
        let photo = scene.photos.get(i).unwrap_or(&black);
        save_image(&dir.join("images").join(format!("img_{i:03}.png")), photo)?;
    }

    let summary = format!(
        "shape = \"{}\"\nvertices = {}\nfaces = {}\ncameras = {}\nwidth = {}\nheight = {}\nsparse_points = {}\nseed = {}\n",
        scene.spec.shape.name(),
        scene.mesh.vertices().len(),
        scene.mesh.faces().len(),
        scene.recon.cameras.len(),
        scene.spec.width,
        scene.spec.height,
        scene.recon.sparse.len(),
        scene.spec.seed,
    );
    std::fs::write(dir.join("scene.toml"), summary)?;
    Ok(())
}

fn validate_spec(spec: &SceneSpec) -> Result<(), SynthError> {
    let fail = |m: &str| Err(SynthError::BadSpec(m.into()));
    if spec.segments < 3 || spec.rings < 2 {
        return fail("need at least 3 segments and 2 rings");
    }
    if spec.cameras == 0 {
        return fail("need at least one camera");
    }
    if spec.sparse_stride == 0 {
        return fail("sparse_stride must be positive");
    }
    if !(spec.jitter >= 0.0) || spec.jitter > 0.2 {
        return fail("jitter must be in [0, 0.2]");
    }
    Ok(())
}

/// Procedural paint for a synthetic surface: a smooth two-palette weave
/// plus fine color bands in parameter space, and broad blobs in world
/// space. One evaluation serves both the per-vertex ground truth and the
/// per-pixel photo shading, so rendered photos carry detail finer than
/// the vertex grid, the way real photographs outresolve a scan.
#[derive(Debug, Clone)]
struct SurfaceTexture {
    light: [f64; 3],
    dark: [f64; 3],
    weave_t: f64,
    weave_az: f64,
    /// (tint, profile frequency, whole azimuth cycles, two phases).
    bands: Vec<([f64; 3], f64, f64, f64, f64)>,
    blobs: Vec<(Vec3, f64, [f64; 3])>,
    /// Dense fine-grained world-space speckle. Isotropic grains keep
    /// block matching locked even between views with some relative roll,
    /// where coherent wave patterns decorrelate.
    speckle: SpeckleField,
    /// Calm the caps of closed surfaces: all detail fades to a flat tone
    /// near t = 0 and 1. The azimuth parameter degenerates there, and the
    /// views that cover a cap see it from widely rotated frames, so flat
    /// caps keep both the ground truth and cross-view sampling honest.
    fade_poles: bool,
}

/// Thousands of small Gaussian grains scattered over the surface,
/// bucketed on a coarse world grid so evaluation stays local.
#[derive(Debug, Clone)]
struct SpeckleField {
    cell: f64,
    grains: Vec<(Vec3, f64, [f64; 3])>,
    grid: std::collections::HashMap<(i32, i32, i32), Vec<u32>>,
}

impl SpeckleField {
    fn generate(rng: &mut ChaCha8Rng, points: &[Vec3], count: usize) -> Self {
        let mut grains = Vec::with_capacity(count);
        let mut grid: std::collections::HashMap<(i32, i32, i32), Vec<u32>> =
            std::collections::HashMap::new();
        // Largest grain radius we ever evaluate; one grid cell covers it.
        let cell = 2.5 * 0.028;
        for i in 0..count {
            let center = points[rng.random_range(0..points.len())];
            let sigma = 0.020 + 0.011 * rng.random::<f64>();
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            let tint = [0; 3].map(|_| sign * (0.08 + 0.08 * rng.random::<f64>()));
            grains.push((center, sigma, tint));
            let key = Self::key(center, cell);
            grid.entry(key).or_default().push(i as u32);
        }
        SpeckleField { cell, grains, grid }
    }

    fn key(p: Vec3, cell: f64) -> (i32, i32, i32) {
        (
            (p.x / cell).floor() as i32,
            (p.y / cell).floor() as i32,
            (p.z / cell).floor() as i32,
        )
    }

    /// Sum of nearby grains; each is a Gaussian shifted to reach zero at
    /// 2.5 sigma so the truncation stays continuous.
    fn sample(&self, p: Vec3) -> [f64; 3] {
        let (kx, ky, kz) = Self::key(p, self.cell);
        let mut acc = [0.0; 3];
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(ids) = self.grid.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    for &i in ids {
                        let (center, sigma, tint) = self.grains[i as usize];
                        let d2 = (p - center).norm_squared();
                        let r = 2.5 * sigma;
                        if d2 >= r * r {
                            continue;
                        }
                        let g = (-d2 / (2.0 * sigma * sigma)).exp() - (-3.125f64).exp();
                        for ch in 0..3 {
                            acc[ch] += tint[ch] * g;
                        }
                    }
                }
            }
        }
        acc
    }
}

/// Smoothstep plateau: 0 outside [0.08, 0.92], 1 inside [0.2, 0.8].
fn cap_plateau(t: f64) -> f64 {
    let edge = |x: f64| {
        let u = ((x - 0.08) / 0.12).clamp(0.0, 1.0);
        u * u * (3.0 - 2.0 * u)
    };
    edge(t) * edge(1.0 - t)
}

impl SurfaceTexture {
    fn generate(spec: &SceneSpec, rng: &mut ChaCha8Rng, points: &[Vec3]) -> Self {
        let tau = std::f64::consts::TAU;
        let rings = spec.rings as f64;
        let segments = spec.segments as f64;
        // Band periods run from a few vertex spacings down to about two,
        // so matching blocks see curvature, not just a local ramp; whole
        // azimuth cycle counts keep them continuous across the wrap seam.
        let mut bands = Vec::new();
        for (amp, steps_t, steps_az) in [
            (0.05, 3.0, 3.2),
            (0.045, 4.4, 4.7),
            (0.035, 6.3, 6.8),
            (0.06, 1.9, 2.1),
        ] {
            let tint = [0; 3].map(|_| amp * (0.4 + 0.6 * rng.random::<f64>()));
            bands.push((
                tint,
                rings / steps_t,
                (segments / steps_az).round().max(1.0),
                tau * rng.random::<f64>(),
                tau * rng.random::<f64>(),
            ));
        }
        let blobs = (0..12)
            .map(|_| {
                let center = points[rng.random_range(0..points.len())];
                let sigma = 0.15 + 0.25 * rng.random::<f64>();
                let tint = [0; 3].map(|_| (rng.random::<f64>() - 0.5) * 0.6);
                (center, sigma, tint)
            })
            .collect();
        let speckle = SpeckleField::generate(rng, points, 5200);
        SurfaceTexture {
            light: [0.85, 0.8, 0.72],
            dark: [0.18, 0.22, 0.3],
            weave_t: (rings / 25.0).round().max(1.0),
            weave_az: (segments / 25.0).round().max(1.0),
            bands,
            blobs,
            speckle,
            fade_poles: !matches!(spec.shape, Shape::Plane),
        }
    }

    fn color_at(&self, t: f64, az: f64, p: Vec3) -> [f64; 3] {
        let tau = std::f64::consts::TAU;
        let fade = if self.fade_poles { cap_plateau(t) } else { 1.0 };
        let weave =
            0.5 * (1.0 + fade * (tau * self.weave_t * t).sin() * (self.weave_az * az).sin());
        let mut c = [0, 1, 2].map(|ch| self.dark[ch] + (self.light[ch] - self.dark[ch]) * weave);
        for &(tint, ft, faz, pt, paz) in &self.bands {
            let b = fade * (tau * ft * t + pt).sin() * (faz * az + paz).sin();
            for ch in 0..3 {
                c[ch] += tint[ch] * b;
            }
        }
        for &(center, sigma, tint) in &self.blobs {
            let g = fade * (-(p - center).norm_squared() / (2.0 * sigma * sigma)).exp();
            for ch in 0..3 {
                c[ch] += tint[ch] * g;
            }
        }
        let grain = self.speckle.sample(p);
        for ch in 0..3 {
            c[ch] += fade * grain[ch];
        }
        c.map(|v| v.clamp(0.02, 0.98))
    }
}

/// Profile fraction and azimuth of a world point on the ideal surface.
/// Jitter displaces vertices along directions that leave both values
/// unchanged, so they are exact for mesh vertices too.
fn surface_params(shape: Shape, p: Vec3) -> (f64, f64) {
    match shape {
        Shape::Sphere => ((-p.y).clamp(-1.0, 1.0).acos() / std::f64::consts::PI, p.z.atan2(p.x)),
        Shape::Vase => (((p.y + 1.2) / 2.4).clamp(0.0, 1.0), p.z.atan2(p.x)),
        Shape::Plane => ((p.z + 1.5) / 3.0, std::f64::consts::TAU * (p.x + 1.5) / 3.0),
    }
}

/// Paints the texture over every covered pixel of a rendered view using
/// the true surface position behind the pixel.
fn shade_photo(gbuf: &GeometryBuffer, shape: Shape, tex: &SurfaceTexture) -> Image {
    let (w, h) = (gbuf.width(), gbuf.height());
    let pixels = (0..w * h)
        .map(|i| {
            if !gbuf.depth.values()[i].is_finite() {
                return BACKGROUND;
            }
            let p = gbuf.positions[i];
            let (t, az) = surface_params(shape, p);
            tex.color_at(t, az, p)
        })
        .collect();
    Image::new(w, h, pixels).expect("raster-sized buffer")
}

fn build_mesh(
    spec: &SceneSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(TriangleMesh, SurfaceTexture), SynthError> {
    let (mut points, faces) = match spec.shape {
        Shape::Sphere => revolution(spec.segments, spec.rings, |t| (std::f64::consts::PI * t).sin(), |t| {
            -(std::f64::consts::PI * t).cos()
        }),
        Shape::Vase => revolution(
            spec.segments,
            spec.rings,
            |t| {
                let phi = std::f64::consts::PI * t;
                phi.sin() * (1.0 + 0.15 * phi.cos())
            },
            |t| 2.4 * t - 1.2,
        ),
        Shape::Plane => plane_grid(spec.segments, spec.rings),
    };

    for p in points.iter_mut() {
        let u = rng.random::<f64>() * 2.0 - 1.0;
        match spec.shape {
            Shape::Plane => p.y += spec.jitter * u,
            _ => {
                let r = (p.x * p.x + p.z * p.z).sqrt();
                if r > 1e-9 {
                    let dir = Vec3::new(p.x / r, 0.0, p.z / r);
                    *p += dir * (spec.jitter * u);
                }
            }
        }
    }

    let texture = SurfaceTexture::generate(spec, rng, &points);
    let colors = points
        .iter()
        .map(|&p| {
            let (t, az) = surface_params(spec.shape, p);
            texture.color_at(t, az, p)
        })
        .collect();
    let cloud = PointCloud::new(points)?.with_colors(colors)?;
    Ok((TriangleMesh::new(cloud, faces)?, texture))
}

type MeshData = (Vec<Vec3>, Vec<[usize; 3]>);

/// Closed surface of revolution around the y axis: two poles plus
/// `rings - 1` rings of `segments` vertices.
fn revolution(
    segments: usize,
    rings: usize,
    radius: impl Fn(f64) -> f64,
    height: impl Fn(f64) -> f64,
) -> MeshData {
    let mut points = vec![
        Vec3::new(0.0, height(0.0), 0.0),
        Vec3::new(0.0, height(1.0), 0.0),
    ];
    let idx = |i: usize, j: usize| 2 + (i - 1) * segments + (j % segments);
    for i in 1..rings {
        let t = i as f64 / rings as f64;
        let (r, y) = (radius(t), height(t));
        for j in 0..segments {
            let theta = std::f64::consts::TAU * j as f64 / segments as f64;
            points.push(Vec3::new(r * theta.cos(), y, r * theta.sin()));
        }
    }

    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, idx(1, j), idx(1, j + 1)]);
        faces.push([1, idx(rings - 1, j + 1), idx(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b) = (idx(i, j), idx(i, j + 1));
            let (c, d) = (idx(i + 1, j + 1), idx(i + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (points, faces)
}

/// Grid of `sx` by `sz` cells on y = 0.
fn plane_grid(sx: usize, sz: usize) -> MeshData {
    let mut points = Vec::with_capacity((sx + 1) * (sz + 1));
    for iz in 0..=sz {
        for ix in 0..=sx {
            points.push(Vec3::new(
                -1.5 + 3.0 * ix as f64 / sx as f64,
                0.0,
                -1.5 + 3.0 * iz as f64 / sz as f64,
            ));
        }
    }
    let idx = |ix: usize, iz: usize| iz * (sx + 1) + ix;
    let mut faces = Vec::new();
    for iz in 0..sz {
        for ix in 0..sx {
            faces.push([idx(ix, iz), idx(ix + 1, iz), idx(ix + 1, iz + 1)]);
            faces.push([idx(ix, iz), idx(ix + 1, iz + 1), idx(ix, iz + 1)]);
        }
    }
    (points, faces)
}

fn camera_ring(spec: &SceneSpec) -> Result<Vec<Camera>, ProjectionError> {
    // Two constraints shape the layout. Coverage: closed surfaces need
    // views from both hemispheres plus near-axial shots, or the poles
    // only ever appear on silhouettes and grazing bands where the border
    // weight vanishes. Matching: a point's top-weighted views should be
    // mutually close in angle, or block matching between them
    // degenerates. Large counts get a tiered dome whose neighbors stay
    // within ~35 degrees of each other; flat scenes use a tight
    // same-side arc instead.
    let tau = std::f64::consts::TAU;
    let pi = std::f64::consts::PI;
    let base = 0.4;
    let mut slots: Vec<(f64, f64)> = Vec::with_capacity(spec.cameras);
    match spec.shape {
        Shape::Plane => {
            for k in 0..spec.cameras {
                let az = base + 0.26 * k as f64;
                slots.push((az, if k % 2 == 0 { 0.5 } else { 0.6 }));
            }
        }
        _ if spec.cameras >= 20 => {
            // Vertical arcs of three on evenly spaced meridians. Arc
            // members share an azimuth, so the views a point weights
            // highest differ by elevation or a single meridian step and
            // never by a large in-plane rotation, which block matching
            // cannot absorb. Four near-axial cameras cover the caps,
            // whose color is kept calm; leftover cameras densify the
            // equator between meridians.
            let polar = if spec.cameras >= 28 { 4 } else { 0 };
            let rest = spec.cameras - polar;
            let meridians = rest / 3;
            let extra = rest - 3 * meridians;
            let step = tau / meridians as f64;
            for k in 0..meridians {
                let az = base + step * k as f64;
                slots.push((az, 0.0));
                slots.push((az, 0.663));
                slots.push((az, -0.663));
            }
            for k in 0..extra {
                slots.push((base + step * (k as f64 + 0.5), 0.0));
            }
            for k in 0..polar {
                let az = base + pi * (k % 2) as f64 + pi / 2.0 * (k / 2) as f64;
                slots.push((az, if k / 2 == 0 { 1.466 } else { -1.466 }));
            }
        }
        _ => {
            let axial = if spec.cameras >= 6 { 2 } else { 0 };
            let ring = spec.cameras - axial;
            for k in 0..ring {
                let az = tau * k as f64 / ring as f64 + base;
                slots.push((az, if k % 2 == 0 { 0.45 } else { -0.45 }));
            }
            for k in 0..axial {
                let az = base + pi * k as f64;
                slots.push((az, if k == 0 { 1.4 } else { -1.4 }));
            }
        }
    }
    let mut cams = Vec::with_capacity(spec.cameras);
    for (theta, elev) in slots {
        let eye = Vec3::new(
            spec.camera_distance * theta.cos() * elev.cos(),
            spec.camera_distance * elev.sin(),
            spec.camera_distance * theta.sin() * elev.cos(),
        );
        cams.push(look_at_camera(
            eye,
            Vec3::zeros(),
            Vec3::y(),
            spec.focal,
            spec.width,
            spec.height,
        )?);
    }
    Ok(cams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_bundler;

    fn sphere_spec(seed: u64) -> SceneSpec {
        let mut spec = preset("sphere", seed).unwrap();
        spec.cameras = 3;
        spec.width = 160;
        spec.height = 120;
        spec.focal = 130.0;
        spec
    }

    #[test]
    fn vertex_and_camera_counts_match_the_requested_grid() {
        let mut spec = sphere_spec(5);
        spec.truth = SimilarityTransform::new(
            1.6,
            nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), 0.9).into_inner(),
            Vec3::new(2.0, 0.0, -1.0),
        )
        .unwrap();
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.mesh.vertices().len(), 2 + (spec.rings - 1) * spec.segments);
        assert_eq!(scene.cameras.len(), 3);
        assert_eq!(scene.recon.cameras.len(), 4, "decoy camera appended");
        assert!(scene.recon.cameras[3].is_none());
        assert_eq!(scene.recon.sparse.len(), scene.mesh.vertices().len().div_ceil(2));
        let observed = scene.recon.views.iter().filter(|v| !v.is_empty()).count();
        assert!(
            observed * 10 >= scene.recon.views.len() * 5,
            "at least half the sparse points should be seen somewhere, got {observed}"
        );
    }

    #[test]
    fn reconstruction_frame_projects_points_onto_their_recorded_views() {
        let mut spec = sphere_spec(6);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        spec.truth = random_similarity(&mut rng, 0.3, 3.0);
        let scene = generate_scene(&spec).unwrap();
        let mut checked = 0;
        for (pi, views) in scene.recon.views.iter().enumerate() {
            let q = scene.recon.sparse.points()[pi];
            for view in views {
                let cam = scene.recon.cameras[view.camera].as_ref().unwrap();
                let proj = cam.project(q).expect("viewed point is in front");
                let (u, v) = BundlerReconstruction::view_pixel(view, cam);
                assert!(
                    (proj.u - u).abs() < 1e-6 && (proj.v - v).abs() < 1e-6,
                    "point {pi} view {}: ({}, {}) vs ({u}, {v})",
                    view.camera,
                    proj.u,
                    proj.v,
                );
                checked += 1;
            }
        }
        assert!(checked > 100, "expected plenty of views, got {checked}");
    }

    #[test]
    fn rasterizer_and_raycaster_agree_almost_everywhere() {
        let spec = sphere_spec(7);
        let scene = generate_scene(&spec).unwrap();
        let cast = raycast_image(&scene.mesh, &scene.cameras[0], BACKGROUND);
        let drawn =
            render_gbuffer(Surface::Mesh(&scene.mesh), &scene.cameras[0]).to_image(BACKGROUND);
        let total = (cast.width() * cast.height()) as f64;
        let mut close = 0usize;
        for (a, b) in cast.pixels().iter().zip(drawn.pixels().iter()) {
            let gap = (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max);
            if gap <= 2.0 / 255.0 {
                close += 1;
            }
        }
        assert!(
            close as f64 >= 0.99 * total,
            "only {close} of {total} pixels agree"
        );
    }

    #[test]
    fn written_scene_round_trips_through_the_parsers() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate_scene(&sphere_spec(8)).unwrap();
        write_scene(dir.path(), &scene).unwrap();

        let ply = crate::ingest::parse_ply(&std::fs::read(dir.path().join("scan.ply")).unwrap())
            .unwrap();
        let mesh = ply.as_mesh().expect("scan keeps its faces");
        assert_eq!(mesh.vertices().len(), scene.mesh.vertices().len());
        assert_eq!(mesh.vertices().points(), scene.mesh.vertices().points());
        assert!(mesh.vertices().colors().is_none());

        let dims = vec![(160, 120); scene.recon.cameras.len()];
        let back =
            parse_bundler(&std::fs::read(dir.path().join("bundle.out")).unwrap(), &dims).unwrap();
        assert_eq!(back.cameras.len(), scene.recon.cameras.len());
        assert_eq!(back.views, scene.recon.views);

        let images: Vec<_> = std::fs::read_dir(dir.path().join("images")).unwrap().collect();
        assert_eq!(images.len(), scene.recon.cameras.len());
        let truth = crate::registration::parse_transform(
            &std::fs::read_to_string(dir.path().join("truth/transform.txt")).unwrap(),
        )
        .unwrap();
        assert_eq!(truth.scale(), scene.truth.scale());
    }

    #[test]
    fn principal_shift_changes_projections_by_that_many_pixels() {
        let scene = generate_scene(&sphere_spec(9)).unwrap();
        let shifted = shift_principal(&scene, 1, 4.0, -2.0);
        let p = scene.recon.sparse.points()[0];
        let before = scene.recon.cameras[1].as_ref().unwrap().project(p).unwrap();
        let after = shifted.recon.cameras[1].as_ref().unwrap().project(p).unwrap();
        assert!((after.u - before.u - 4.0).abs() < 1e-12);
        assert!((after.v - before.v + 2.0).abs() < 1e-12);
        let p0 = scene.recon.cameras[0].as_ref().unwrap().project(p);
        let s0 = shifted.recon.cameras[0].as_ref().unwrap().project(p);
        assert_eq!(p0.map(|x| x.u), s0.map(|x| x.u), "other cameras untouched");
    }

    #[test]
    fn zero_magnitude_perturbations_change_nothing() {
        let scene = generate_scene(&sphere_spec(10)).unwrap();
        let modes = [
            Perturbation::PrincipalShift { camera: 0, dx: 0.0, dy: 0.0 },
            Perturbation::CameraRotation { camera: 1, milliradians: 0.0 },
            Perturbation::PointNoise { sigma: 0.0 },
        ];
        for mode in modes {
            let out = perturb_scene(&scene, mode, 3).unwrap();
            assert_eq!(out.recon.cameras, scene.recon.cameras, "{mode:?}");
            assert_eq!(out.recon.sparse.points(), scene.recon.sparse.points(), "{mode:?}");
        }
    }

    #[test]
    fn camera_tilt_rotates_by_the_requested_angle_about_the_center() {
        let scene = generate_scene(&sphere_spec(11)).unwrap();
        let out =
            perturb_scene(&scene, Perturbation::CameraRotation { camera: 2, milliradians: 5.0 }, 7)
                .unwrap();
        let before = scene.recon.cameras[2].as_ref().unwrap();
        let after = out.recon.cameras[2].as_ref().unwrap();
        let rel = after.rotation() * before.rotation().transpose();
        let angle = (((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0)).acos();
        assert!((angle - 0.005).abs() < 1e-9, "tilt angle {angle}");
        assert!((after.center() - before.center()).norm() < 1e-9, "center moved");
        assert_eq!(
            out.recon.cameras[0], scene.recon.cameras[0],
            "other cameras untouched"
        );
    }

    #[test]
    fn reframing_keeps_views_consistent_and_swaps_the_truth() {
        let mut spec = sphere_spec(12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        spec.truth = random_similarity(&mut rng, 0.5, 2.0);
        let scene = generate_scene(&spec).unwrap();
        let shifted = shift_principal(&scene, 1, 3.0, 0.0);
        let out = perturb_scene(
            &shifted,
            Perturbation::CloudSimilarity { min_scale: 0.2, max_scale: 5.0 },
            21,
        )
        .unwrap();

        assert!((out.truth.scale() - scene.truth.scale()).abs() > 1e-6, "truth changed");
        assert_eq!(out.spec.truth.scale(), out.truth.scale());
        let mut checked = 0;
        for (pi, views) in out.recon.views.iter().enumerate() {
            let q = out.recon.sparse.points()[pi];
            for view in views {
                if view.camera == 1 {
                    continue;
                }
                let cam = out.recon.cameras[view.camera].as_ref().unwrap();
                let proj = cam.project(q).expect("viewed point stays in front");
                let (u, v) = BundlerReconstruction::view_pixel(view, cam);
                assert!((proj.u - u).abs() < 1e-6 && (proj.v - v).abs() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 50, "expected plenty of views, got {checked}");

        let q = out.recon.sparse.points()[0];
        let p = scene.recon.sparse.points()[0];
        let kept = out.recon.cameras[1].as_ref().unwrap().project(q).unwrap();
        let was = shifted.recon.cameras[1].as_ref().unwrap().project(p).unwrap();
        assert!((kept.u - was.u).abs() < 1e-6, "principal shift survives reframing");
    }

    #[test]
    fn point_noise_moves_points_but_keeps_colors_and_determinism() {
        let scene = generate_scene(&sphere_spec(13)).unwrap();
        let mode = Perturbation::PointNoise { sigma: 0.01 };
        let a = perturb_scene(&scene, mode, 5).unwrap();
        let b = perturb_scene(&scene, mode, 5).unwrap();
        assert_eq!(a.recon.sparse.points(), b.recon.sparse.points());
        assert_eq!(a.recon.sparse.colors(), scene.recon.sparse.colors());
        let mean_shift: f64 = a
            .recon
            .sparse
            .points()
            .iter()
            .zip(scene.recon.sparse.points())
            .map(|(n, o)| (n - o).norm())
            .sum::<f64>()
            / a.recon.sparse.len() as f64;
        assert!(mean_shift > 1e-4 && mean_shift < 0.1, "mean shift {mean_shift}");
        assert!(
            perturb_scene(&scene, Perturbation::PointNoise { sigma: -1.0 }, 0).is_err()
        );
        assert!(perturb_scene(
            &scene,
            Perturbation::PrincipalShift { camera: 99, dx: 1.0, dy: 0.0 },
            0
        )
        .is_err());
    }
}
