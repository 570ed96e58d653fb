use crate::geom::{PointCloud, TriangleMesh, Vec3};
use crate::imageproc::Image;

use super::camera::{Camera, PixelProjection};

/// Screen-space triangles smaller than this are dropped as degenerate.
const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Per-pixel nearest depth along the camera z axis; empty pixels hold +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, depth: vec![f64::INFINITY; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    /// Min and max over covered pixels, `None` for a fully empty map.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for &d in &self.depth {
            if d.is_finite() {
                let (lo, hi) = range.get_or_insert((d, d));
                *lo = lo.min(d);
                *hi = hi.max(d);
            }
        }
        range
    }
}

/// Depth plus the world-space position, surface normal and color of the
/// nearest surface at every covered pixel.
#[derive(Debug, Clone)]
pub struct GeometryBuffer {
    pub depth: DepthMap,
    /// World position of the visible surface; meaningful only where covered.
    pub positions: Vec<Vec3>,
    /// Unit surface normal, or zero where unknown / uncovered.
    pub normals: Vec<Vec3>,
    /// Interpolated surface color; black where the surface has none.
    pub colors: Vec<[f64; 3]>,
}

impl GeometryBuffer {
    fn empty(width: usize, height: usize) -> Self {
        Self {
            depth: DepthMap::empty(width, height),
            positions: vec![Vec3::zeros(); width * height],
            normals: vec![Vec3::zeros(); width * height],
            colors: vec![[0.0; 3]; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }

    /// The color channel as an image over the given background.
    pub fn to_image(&self, background: [f64; 3]) -> Image {
        let pixels = self
            .depth
            .depth
            .iter()
            .zip(&self.colors)
            .map(|(d, c)| if d.is_finite() { c.map(|v| v.clamp(0.0, 1.0)) } else { background })
            .collect();
        Image::new(self.depth.width, self.depth.height, pixels).expect("buffer sized to raster")
    }
}

/// Geometry a camera can observe: a triangle mesh, or a point cloud drawn
/// as square splats of the given pixel radius.
#[derive(Debug, Clone, Copy)]
pub enum Surface<'a> {
    Mesh(&'a TriangleMesh),
    Cloud { cloud: &'a PointCloud, splat_radius: usize },
}

/// Renders only the depth channel.
pub fn render_depth_map(surface: Surface<'_>, cam: &Camera) -> DepthMap {
    render_gbuffer(surface, cam).depth
}

/// Depth-buffer rasterization at pixel centers.
///
/// Triangles are sampled at integer pixel coordinates with perspective-
/// correct interpolation of position, normal and color (1/z weighting);
/// the smallest depth wins each pixel. Triangles with any vertex on or
/// behind the camera plane are skipped entirely (no near-plane clipping),
/// as are screen-degenerate ones. Point clouds draw constant-attribute
/// squares centered on the rounded projection.
pub fn render_gbuffer(surface: Surface<'_>, cam: &Camera) -> GeometryBuffer {
    let mut buf = GeometryBuffer::empty(cam.width(), cam.height());
    match surface {
        Surface::Mesh(mesh) => {
            let points = mesh.vertices().points();
            let projected: Vec<Option<PixelProjection>> =
                points.iter().map(|&p| cam.project(p)).collect();
            let normals: Vec<Vec3> = match mesh.vertices().normals() {
                Some(n) => n.to_vec(),
                None => mesh.vertex_normals(),
            };
            let colors = mesh.vertices().colors();
            for face in mesh.faces() {
                let (Some(a), Some(b), Some(c)) =
                    (projected[face[0]], projected[face[1]], projected[face[2]])
                else {
                    continue;
                };
                let corners = [
                    VertexData::new(a, points[face[0]], normals[face[0]], color_of(colors, face[0])),
                    VertexData::new(b, points[face[1]], normals[face[1]], color_of(colors, face[1])),
                    VertexData::new(c, points[face[2]], normals[face[2]], color_of(colors, face[2])),
                ];
                rasterize_triangle(&corners, &mut buf);
            }
        }
        Surface::Cloud { cloud, splat_radius } => {
            let normals = cloud.normals();
            let colors = cloud.colors();
            let w = buf.width() as i64;
            let h = buf.height() as i64;
            let r = splat_radius as i64;
            for (i, &p) in cloud.points().iter().enumerate() {
                let Some(proj) = cam.project(p) else { continue };
                let (cx, cy) = proj.pixel();
                if cx < 0 || cx >= w || cy < 0 || cy >= h {
                    continue;
                }
                let n = normals.map_or(Vec3::zeros(), |ns| ns[i]);
                let col = color_of(colors, i);
                for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
                    for x in (cx - r).max(0)..=(cx + r).min(w - 1) {
                        let idx = y as usize * buf.width() + x as usize;
                        if proj.depth < buf.depth.depth[idx] {
                            buf.depth.depth[idx] = proj.depth;
                            buf.positions[idx] = p;
                            buf.normals[idx] = n;
                            buf.colors[idx] = col;
                        }
                    }
                }
            }
        }
    }
    buf
}

fn color_of(colors: Option<&[[f64; 3]]>, i: usize) -> [f64; 3] {
    colors.map_or([0.0; 3], |c| c[i])
}

struct VertexData {
    u: f64,
    v: f64,
    inv_z: f64,
    position: Vec3,
    normal: Vec3,
    color: [f64; 3],
}

impl VertexData {
    fn new(proj: PixelProjection, position: Vec3, normal: Vec3, color: [f64; 3]) -> Self {
        Self { u: proj.u, v: proj.v, inv_z: 1.0 / proj.depth, position, normal, color }
    }
}

fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

fn rasterize_triangle(v: &[VertexData; 3], buf: &mut GeometryBuffer) {
    let area = edge(v[0].u, v[0].v, v[1].u, v[1].v, v[2].u, v[2].v);
    if !area.is_finite() || area.abs() < MIN_TRIANGLE_AREA {
        return;
    }
    let w = buf.width() as i64;
    let h = buf.height() as i64;
    let min_u = v.iter().map(|p| p.u).fold(f64::INFINITY, f64::min);
    let max_u = v.iter().map(|p| p.u).fold(f64::NEG_INFINITY, f64::max);
    let min_v = v.iter().map(|p| p.v).fold(f64::INFINITY, f64::min);
    let max_v = v.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_u.ceil() as i64).max(0);
    let x1 = (max_u.floor() as i64).min(w - 1);
    let y0 = (min_v.ceil() as i64).max(0);
    let y1 = (max_v.floor() as i64).min(h - 1);

    for py in y0..=y1 {
        for px in x0..=x1 {
            let (sx, sy) = (px as f64, py as f64);
            let e0 = edge(v[1].u, v[1].v, v[2].u, v[2].v, sx, sy) / area;
            let e1 = edge(v[2].u, v[2].v, v[0].u, v[0].v, sx, sy) / area;
            let e2 = edge(v[0].u, v[0].v, v[1].u, v[1].v, sx, sy) / area;
            if e0 < 0.0 || e1 < 0.0 || e2 < 0.0 {
                continue;
            }
            let weights = [e0, e1, e2];
            let inv_z: f64 = (0..3).map(|i| weights[i] * v[i].inv_z).sum();
            if inv_z <= 0.0 {
                continue;
            }
            let depth = 1.0 / inv_z;
            let idx = py as usize * buf.width() + px as usize;
            if depth >= buf.depth.depth[idx] {
                continue;
            }
            let mut position = Vec3::zeros();
            let mut normal = Vec3::zeros();
            let mut color = [0.0; 3];
            for i in 0..3 {
                let pw = weights[i] * v[i].inv_z * depth;
                position += pw * v[i].position;
                normal += pw * v[i].normal;
                for ch in 0..3 {
                    color[ch] += pw * v[i].color[ch];
                }
            }
            let n_len = normal.norm();
            buf.depth.depth[idx] = depth;
            buf.positions[idx] = position;
            buf.normals[idx] = if n_len > 0.0 { normal / n_len } else { Vec3::zeros() };
            buf.colors[idx] = color;
        }
    }
}
