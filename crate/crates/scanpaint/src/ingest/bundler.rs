//! Bundler v0.3 reconstruction files: camera calibrations, the sparse
//! point cloud, and per-point view lists.
//!
//! The file stores cameras looking down their local -z axis with y up.
//! Parsing converts them to this crate's convention (z forward, y down)
//! by conjugating with `diag(1, -1, -1)`; writing converts back, so a
//! parse/write cycle reproduces the original numbers exactly.

use nalgebra::Matrix3;

use crate::geom::{PointCloud, Vec3};
use crate::projection::Camera;

use super::IngestError;

/// One observation of a sparse point in one photograph, kept in the file's
/// native coordinates: origin at the image center, x right, y up.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlerView {
    pub camera: usize,
    pub keypoint: i64,
    pub x: f64,
    pub y: f64,
}

/// A parsed reconstruction.
#[derive(Debug, Clone)]
pub struct BundlerReconstruction {
    /// `None` where the file carries an all-zero (unestimated) camera.
    pub cameras: Vec<Option<Camera>>,
    pub sparse: PointCloud,
    /// Per sparse point, the photographs that observed it.
    pub views: Vec<Vec<BundlerView>>,
}

impl BundlerReconstruction {
    /// Converts a view's centered, y-up coordinates to pixel coordinates
    /// of the camera that saw it (y growing down).
    pub fn view_pixel(view: &BundlerView, camera: &Camera) -> (f64, f64) {
        let (cx, cy) = camera.principal_point();
        (cx + view.x, cy - view.y)
    }
}

fn flip() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
}

struct Cursor<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut last_line = 1;
        for (i, line) in text.lines().enumerate() {
            last_line = i + 1;
            if line.trim_start().starts_with('#') {
                continue;
            }
            for tok in line.split_ascii_whitespace() {
                toks.push((i + 1, tok));
            }
        }
        Self { toks, pos: 0, last_line }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), IngestError> {
        match self.toks.get(self.pos) {
            Some(&(line, tok)) => {
                self.pos += 1;
                Ok((line, tok))
            }
            None => Err(IngestError::BundlerParse {
                line: self.last_line,
                message: format!("unexpected end of file while reading {what}"),
            }),
        }
    }

    fn real(&mut self, what: &str) -> Result<f64, IngestError> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| IngestError::BundlerParse {
            line,
            message: format!("expected a number for {what}, got \"{tok}\""),
        })
    }

    fn index(&mut self, what: &str) -> Result<usize, IngestError> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| IngestError::BundlerParse {
            line,
            message: format!("expected a non-negative integer for {what}, got \"{tok}\""),
        })
    }

    fn int(&mut self, what: &str) -> Result<i64, IngestError> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| IngestError::BundlerParse {
            line,
            message: format!("expected an integer for {what}, got \"{tok}\""),
        })
    }
}

/// Parses a Bundler v0.3 file. `dims` gives each camera's image size in
/// pixels as `(width, height)`; a single entry is shared by all cameras.
pub fn parse_bundler(
    bytes: &[u8],
    dims: &[(usize, usize)],
) -> Result<BundlerReconstruction, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::BundlerParse {
        line: 1,
        message: "file is not valid UTF-8".into(),
    })?;
    let first = text.lines().next().unwrap_or("");
    if !first.trim().starts_with("# Bundle file") {
        return Err(IngestError::BundlerParse {
            line: 1,
            message: "missing \"# Bundle file v0.3\" header".into(),
        });
    }
    if !first.contains("v0.3") {
        return Err(IngestError::BundlerParse {
            line: 1,
            message: format!("unsupported version in header \"{}\", expected v0.3", first.trim()),
        });
    }

    let mut cur = Cursor::new(text);
    let num_cameras = cur.index("camera count")?;
    let num_points = cur.index("point count")?;

    if dims.len() != num_cameras && dims.len() != 1 {
        return Err(IngestError::DimensionCountMismatch {
            cameras: num_cameras,
            got: dims.len(),
        });
    }
    let dim_of = |i: usize| if dims.len() == 1 { dims[0] } else { dims[i] };

    let d = flip();
    let mut cameras = Vec::with_capacity(num_cameras);
    for i in 0..num_cameras {
        let f = cur.real("focal length")?;
        let k1 = cur.real("distortion k1")?;
        let k2 = cur.real("distortion k2")?;
        let mut r = [0.0; 9];
        for v in r.iter_mut() {
            *v = cur.real("rotation entry")?;
        }
        let t = Vec3::new(
            cur.real("translation entry")?,
            cur.real("translation entry")?,
            cur.real("translation entry")?,
        );
        if f == 0.0 {
            cameras.push(None);
            continue;
        }
        let rb = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        let (w, h) = dim_of(i);
        let cam = Camera::new(
            f,
            k1,
            k2,
            d * rb,
            d * t,
            w,
            h,
            w as f64 / 2.0,
            h as f64 / 2.0,
        )
        .map_err(|source| IngestError::BundlerCamera { index: i, source })?;
        cameras.push(Some(cam));
    }

    let mut points = Vec::with_capacity(num_points);
    let mut colors: Vec<[f64; 3]> = Vec::with_capacity(num_points);
    let mut views = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        points.push(Vec3::new(
            cur.real("point position")?,
            cur.real("point position")?,
            cur.real("point position")?,
        ));
        let mut c = [0.0; 3];
        for v in c.iter_mut() {
            let (line, tok) = cur.next("point color")?;
            let raw: i64 = tok.parse().map_err(|_| IngestError::BundlerParse {
                line,
                message: format!("expected an integer color component, got \"{tok}\""),
            })?;
            if !(0..=255).contains(&raw) {
                return Err(IngestError::BundlerParse {
                    line,
                    message: format!("color component {raw} outside 0..=255"),
                });
            }
            *v = raw as f64 / 255.0;
        }
        colors.push(c);
        let m = cur.index("view count")?;
        let mut list = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, tok) = cur.next("view camera index")?;
            let camera: usize = tok.parse().map_err(|_| IngestError::BundlerParse {
                line,
                message: format!("expected a camera index, got \"{tok}\""),
            })?;
            if camera >= num_cameras {
                return Err(IngestError::BundlerParse {
                    line,
                    message: format!("view references camera {camera} but file has {num_cameras}"),
                });
            }
            let keypoint = cur.int("view keypoint index")?;
            let x = cur.real("view x")?;
            let y = cur.real("view y")?;
            list.push(BundlerView { camera, keypoint, x, y });
        }
        views.push(list);
    }

    if let Some(&(line, _)) = cur.toks.get(cur.pos) {
        return Err(IngestError::BundlerParse {
            line,
            message: "unexpected trailing data after last point".into(),
        });
    }

    let sparse = PointCloud::new(points)?.with_colors(colors)?;
    Ok(BundlerReconstruction { cameras, sparse, views })
}

/// Serializes a reconstruction back to Bundler v0.3 text. Numbers use the
/// shortest representation that parses back to the same value.
pub fn write_bundler(recon: &BundlerReconstruction) -> String {
    use std::fmt::Write;

    let d = flip();
    let mut out = String::from("# Bundle file v0.3\n");
    let _ = writeln!(out, "{} {}", recon.cameras.len(), recon.sparse.len());
    for cam in &recon.cameras {
        match cam {
            None => out.push_str("0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n"),
            Some(c) => {
                let rb = d * c.rotation();
                let tb = d * c.translation();
                let _ = writeln!(out, "{} {} {}", c.focal(), c.k1(), c.k2());
                for i in 0..3 {
                    let _ = writeln!(out, "{} {} {}", rb[(i, 0)], rb[(i, 1)], rb[(i, 2)]);
                }
                let _ = writeln!(out, "{} {} {}", tb.x, tb.y, tb.z);
            }
        }
    }
    let colors = recon.sparse.colors();
    let to8 = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    for (i, p) in recon.sparse.points().iter().enumerate() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
        let c = colors.map_or([0.0; 3], |c| c[i]);
        let _ = writeln!(out, "{} {} {}", to8(c[0]), to8(c[1]), to8(c[2]));
        let _ = write!(out, "{}", recon.views[i].len());
        for v in &recon.views[i] {
            let _ = write!(out, " {} {} {} {}", v.camera, v.keypoint, v.x, v.y);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn sample_recon() -> BundlerReconstruction {
        let rot = Rotation3::from_axis_angle(&Vec3::y_axis(), 0.37).into_inner();
        let cam0 = Camera::new(
            812.5,
            -0.041,
            0.0075,
            rot,
            Vec3::new(0.25, -1.5, 4.0),
            1024,
            768,
            512.0,
            384.0,
        )
        .unwrap();
        let sparse = PointCloud::new(vec![
            Vec3::new(0.125, -2.75, 3.0),
            Vec3::new(1.0, 0.5, -0.625),
        ])
        .unwrap()
        .with_colors(vec![[10.0 / 255.0, 128.0 / 255.0, 255.0 / 255.0], [0.0, 0.0, 0.0]])
        .unwrap();
        let views = vec![
            vec![
                BundlerView { camera: 0, keypoint: 17, x: 12.5, y: -3.25 },
                BundlerView { camera: 2, keypoint: -1, x: -100.0, y: 41.0 },
            ],
            vec![],
        ];
        BundlerReconstruction {
            cameras: vec![Some(cam0.clone()), None, Some(cam0)],
            sparse,
            views,
        }
    }

    #[test]
    fn write_then_parse_reproduces_everything_exactly() {
        let recon = sample_recon();
        let text = write_bundler(&recon);
        let back = parse_bundler(text.as_bytes(), &[(1024, 768)]).unwrap();
        assert_eq!(back.cameras, recon.cameras);
        assert_eq!(back.sparse.points(), recon.sparse.points());
        assert_eq!(back.sparse.colors(), recon.sparse.colors());
        assert_eq!(back.views, recon.views);
    }

    #[test]
    fn parsed_camera_projects_like_the_native_convention() {
        // Identity camera in the file's own convention looks down -z with
        // y up. A point at (1, 2, -5) lands, by the native pinhole rule
        // (x, y) = -f (p_x/p_z, p_y/p_z), at centered (f/5, 2f/5), which
        // is pixel (cx + f/5, cy - 2f/5).
        let text = "# Bundle file v0.3\n1 1\n\
                    700 0 0\n1 0 0\n0 1 0\n0 0 1\n0 0 0\n\
                    0 0 0\n0 0 0\n0\n";
        let recon = parse_bundler(text.as_bytes(), &[(640, 480)]).unwrap();
        let cam = recon.cameras[0].as_ref().unwrap();
        let p = cam.project(Vec3::new(1.0, 2.0, -5.0)).unwrap();
        assert!((p.u - (320.0 + 700.0 / 5.0)).abs() < 1e-12);
        assert!((p.v - (240.0 - 2.0 * 700.0 / 5.0)).abs() < 1e-12);
        assert!((p.depth - 5.0).abs() < 1e-12);
    }

    #[test]
    fn view_pixel_flips_y_about_the_center() {
        let recon = sample_recon();
        let cam = recon.cameras[0].as_ref().unwrap();
        let view = &recon.views[0][0];
        let (u, v) = BundlerReconstruction::view_pixel(view, cam);
        assert_eq!((u, v), (512.0 + 12.5, 384.0 + 3.25));
    }

    #[test]
    fn zero_focal_camera_parses_as_unusable() {
        let recon = sample_recon();
        let text = write_bundler(&recon);
        let back = parse_bundler(text.as_bytes(), &[(1024, 768)]).unwrap();
        assert!(back.cameras[1].is_none());
    }

    #[test]
    fn dimension_list_must_match_camera_count() {
        let text = write_bundler(&sample_recon());
        let err = parse_bundler(text.as_bytes(), &[(1024, 768), (1024, 768)]).unwrap_err();
        match err {
            IngestError::DimensionCountMismatch { cameras: 3, got: 2 } => {}
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn bad_token_reports_its_line() {
        let text = "# Bundle file v0.3\n1 0\n\
                    700 0 0\n1 0 0\n0 oops 0\n0 0 1\n0 0 0\n";
        let err = parse_bundler(text.as_bytes(), &[(640, 480)]).unwrap_err();
        match err {
            IngestError::BundlerParse { line: 5, message } => {
                assert!(message.contains("oops"), "{message}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn truncated_file_reports_end_of_input() {
        let text = "# Bundle file v0.3\n1 1\n700 0 0\n1 0 0\n";
        let err = parse_bundler(text.as_bytes(), &[(640, 480)]).unwrap_err();
        match err {
            IngestError::BundlerParse { message, .. } => {
                assert!(message.contains("end of file"), "{message}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        let err = parse_bundler(b"1 0\n700 0 0\n", &[(64, 64)]).unwrap_err();
        match err {
            IngestError::BundlerParse { line: 1, message } => {
                assert!(message.contains("header"), "{message}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }
}
