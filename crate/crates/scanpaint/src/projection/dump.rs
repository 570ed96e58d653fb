use std::io;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use super::masks::QualityMask;
use super::raster::DepthMap;

/// Reserved 16-bit code for pixels with no depth sample.
const EMPTY_DEPTH_CODE: u16 = u16::MAX;

/// Writes a mask as 16-bit grayscale PNG plus a `.txt` sidecar recording
/// the value range, so the stored integers can be mapped back to weights.
pub fn write_mask_png16(path: &Path, mask: &QualityMask) -> io::Result<()> {
    let codes: Vec<u16> = mask
        .weights()
        .iter()
        .map(|w| (w * f64::from(u16::MAX)).round() as u16)
        .collect();
    write_png16(path, mask.width(), mask.height(), &codes)?;
    let sidecar = format!(
        "min 0\nmax 1\nencoding value = code / 65535\nwidth {}\nheight {}\n",
        mask.width(),
        mask.height()
    );
    std::fs::write(sidecar_path(path), sidecar)
}

/// Writes a depth map as 16-bit grayscale PNG. Covered depths are scaled to
/// [0, 65534] over the map's finite range (near = 0); empty pixels store
/// 65535. The sidecar records the range and the empty-pixel sentinel.
pub fn write_depth_png16(path: &Path, depth: &DepthMap) -> io::Result<()> {
    let (lo, hi) = depth.finite_range().unwrap_or((0.0, 0.0));
    let span = hi - lo;
    let codes: Vec<u16> = depth
        .values()
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                EMPTY_DEPTH_CODE
            } else if span > 0.0 {
                (((d - lo) / span) * f64::from(u16::MAX - 1)).round() as u16
            } else {
                0
            }
        })
        .collect();
    write_png16(path, depth.width(), depth.height(), &codes)?;
    let sidecar = format!(
        "min {lo}\nmax {hi}\nencoding depth = min + code / 65534 * (max - min)\nempty_code 65535\nwidth {}\nheight {}\n",
        depth.width(),
        depth.height()
    );
    std::fs::write(sidecar_path(path), sidecar)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    std::path::PathBuf::from(s)
}

fn write_png16(path: &Path, width: usize, height: usize, codes: &[u16]) -> io::Result<()> {
    // The PNG encoder expects 16-bit samples in native byte order.
    let mut bytes = Vec::with_capacity(codes.len() * 2);
    for c in codes {
        bytes.extend_from_slice(&c.to_ne_bytes());
    }
    let file = std::fs::File::create(path)?;
    let encoder = PngEncoder::new(io::BufWriter::new(file));
    encoder
        .write_image(&bytes, width as u32, height as u32, ExtendedColorType::L16)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{PointCloud, Vec3};
    use crate::projection::raster::{render_depth_map, Surface};
    use crate::projection::Camera;
    use nalgebra::Matrix3;

    fn read_png16(path: &Path) -> (u32, u32, Vec<u16>) {
        let img = image::open(path).unwrap().into_luma16();
        let (w, h) = (img.width(), img.height());
        (w, h, img.into_raw())
    }

    #[test]
    fn mask_dump_round_trips_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mask = QualityMask::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let path = dir.path().join("mask.png");
        write_mask_png16(&path, &mask).unwrap();
        let (w, h, codes) = read_png16(&path);
        assert_eq!((w, h), (3, 1));
        for (code, want) in codes.iter().zip(mask.weights()) {
            let back = f64::from(*code) / 65535.0;
            assert!((back - want).abs() <= 0.5 / 65535.0 + 1e-12);
        }
        assert!(std::fs::read_to_string(dir.path().join("mask.png.txt"))
            .unwrap()
            .contains("max 1"));
    }

    #[test]
    fn depth_dump_marks_empty_pixels_and_scales_range() {
        let dir = tempfile::tempdir().unwrap();
        let cam = Camera::simple(4.0, Matrix3::identity(), Vec3::zeros(), 5, 1).unwrap();
        let place = |u: f64, z: f64| Vec3::new((u - 2.5) / 4.0 * z, -0.1 * z, z);
        let cloud = PointCloud::new(vec![place(0.0, 2.0), place(4.0, 6.0)]).unwrap();
        let dm = render_depth_map(Surface::Cloud { cloud: &cloud, splat_radius: 0 }, &cam);
        let path = dir.path().join("depth.png");
        write_depth_png16(&path, &dm).unwrap();
        let (_, _, codes) = read_png16(&path);
        assert!(codes.contains(&0));
        assert!(codes.contains(&65534));
        assert!(codes.contains(&65535));
        let sidecar = std::fs::read_to_string(dir.path().join("depth.png.txt")).unwrap();
        assert!(sidecar.contains("min 2"), "{sidecar}");
        assert!(sidecar.contains("max 6"), "{sidecar}");
        assert!(sidecar.contains("empty_code 65535"));
    }
}
