//! Photo loading and saving. Decodes PNG (8- and 16-bit) and binary PPM
//! (P6, 8- and 16-bit); saves PNG or PPM picked by file extension.

use std::path::Path;

use crate::imageproc::Image;

use super::IngestError;

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Decodes an in-memory image, sniffing the format from its magic bytes.
/// Samples are normalized to [0, 1] by the format's full-scale value.
pub fn decode_image(bytes: &[u8]) -> Result<Image, IngestError> {
    if bytes.starts_with(&PNG_MAGIC) {
        return decode_png(bytes);
    }
    if bytes.starts_with(b"P6") {
        return decode_ppm(bytes);
    }
    Err(IngestError::UnsupportedImageFormat(identify(bytes)))
}

pub fn load_image(path: &Path) -> Result<Image, IngestError> {
    decode_image(&std::fs::read(path)?)
}

/// Writes `img` to `path`; the extension picks the format (`png` or `ppm`),
/// both stored as 8-bit RGB.
pub fn save_image(path: &Path, img: &Image) -> Result<(), IngestError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => {
            let mut buf = image::RgbImage::new(img.width() as u32, img.height() as u32);
            for y in 0..img.height() {
                for x in 0..img.width() {
                    let c = img.get(x, y);
                    buf.put_pixel(x as u32, y as u32, image::Rgb(c.map(to_u8)));
                }
            }
            buf.save(path).map_err(|e| IngestError::ImageDecode(e.to_string()))
        }
        "ppm" => Ok(std::fs::write(path, encode_ppm(img))?),
        other => Err(IngestError::UnsupportedImageFormat(format!(
            "cannot save extension \"{other}\", use png or ppm"
        ))),
    }
}

/// Serializes as binary PPM (P6, maxval 255).
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for px in img.pixels() {
        out.extend(px.map(to_u8));
    }
    out
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn decode_png(bytes: &[u8]) -> Result<Image, IngestError> {
    let dyn_img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| IngestError::ImageDecode(e.to_string()))?;
    let deep = matches!(
        dyn_img.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    let pixels = if deep {
        dyn_img
            .to_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| v as f64 / 65535.0))
            .collect()
    } else {
        dyn_img
            .to_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| v as f64 / 255.0))
            .collect()
    };
    Ok(Image::new(w, h, pixels)?)
}

fn decode_ppm(bytes: &[u8]) -> Result<Image, IngestError> {
    let mut cur = PpmCursor { bytes, pos: 2 };
    let width = cur.int("width")? as usize;
    let height = cur.int("height")? as usize;
    let maxval = cur.int("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(IngestError::ImageDecode(format!("PPM maxval {maxval} outside 1..=65535")));
    }
    match cur.bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(IngestError::ImageDecode(
                "PPM header must end with a single whitespace byte".into(),
            ))
        }
    }
    let per_sample = if maxval > 255 { 2 } else { 1 };
    let needed = width * height * 3 * per_sample;
    let data = &cur.bytes[cur.pos.min(cur.bytes.len())..];
    if data.len() < needed {
        return Err(IngestError::ImageDecode(format!(
            "PPM pixel data truncated: need {needed} bytes, have {}",
            data.len()
        )));
    }
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let mut px = [0.0; 3];
        for (c, v) in px.iter_mut().enumerate() {
            let at = (i * 3 + c) * per_sample;
            let raw = if per_sample == 2 {
                u16::from_be_bytes([data[at], data[at + 1]]) as u64
            } else {
                data[at] as u64
            };
            *v = raw as f64 / scale;
        }
        pixels.push(px);
    }
    Ok(Image::new(width, height, pixels)?)
}

struct PpmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PpmCursor<'_> {
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn int(&mut self, what: &str) -> Result<u64, IngestError> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(IngestError::ImageDecode(format!("PPM header missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| IngestError::ImageDecode(format!("PPM {what} out of range")))
    }
}

fn identify(bytes: &[u8]) -> String {
    let name = if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        "JPEG"
    } else if bytes.starts_with(b"GIF8") {
        "GIF"
    } else if bytes.starts_with(b"BM") {
        "BMP"
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        "TIFF"
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "WebP"
    } else if bytes.starts_with(b"P3") || bytes.starts_with(b"P2") || bytes.starts_with(b"P1") {
        "ASCII netpbm (only binary P6 is supported)"
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P4") {
        "non-color netpbm (only P6 is supported)"
    } else {
        "unrecognized data"
    };
    name.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_known_ppm_bytes() {
        let bytes = b"P6\n2 2\n255\n\
                      \xFF\x00\x00\
                      \x00\xFF\x00\
                      \x00\x00\xFF\
                      \x80\x80\x80";
        let img = decode_image(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.get(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(img.get(1, 0), [0.0, 1.0, 0.0]);
        assert_eq!(img.get(0, 1), [0.0, 0.0, 1.0]);
        assert_eq!(img.get(1, 1), [128.0 / 255.0; 3]);
    }

    #[test]
    fn decodes_sixteen_bit_ppm_big_endian() {
        let mut bytes = b"P6 2 1 65535\n".to_vec();
        for v in [0u16, 32768, 65535, 1, 256, 513] {
            bytes.extend(v.to_be_bytes());
        }
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.get(0, 0), [0.0, 32768.0 / 65535.0, 1.0]);
        assert_eq!(img.get(1, 0), [1.0 / 65535.0, 256.0 / 65535.0, 513.0 / 65535.0]);
    }

    #[test]
    fn ppm_comments_in_header_are_skipped() {
        let bytes = b"P6 # tiny\n# another note\n1 1\n255\n\x10\x20\x30";
        let img = decode_image(bytes).unwrap();
        assert_eq!(img.get(0, 0), [16.0 / 255.0, 32.0 / 255.0, 48.0 / 255.0]);
    }

    #[test]
    fn sixteen_bit_png_keeps_full_precision() {
        // Oracle: every decoded sample must equal raw/65535 exactly.
        let raw: Vec<u16> = (0..12).map(|i| (i * 5461 + 7) as u16).collect();
        let buf = image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(2, 2, raw.clone()).unwrap();
        let mut png = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut png, image::ImageFormat::Png).unwrap();
        let img = decode_image(png.get_ref()).unwrap();
        for (i, px) in img.pixels().iter().enumerate() {
            for c in 0..3 {
                assert_eq!(px[c], raw[i * 3 + c] as f64 / 65535.0);
            }
        }
    }

    #[test]
    fn ppm_save_then_load_preserves_eight_bit_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let pixels: Vec<[f64; 3]> = (0..6)
            .map(|i| [0, 1, 2].map(|c| ((i * 37 + c * 11) % 256) as f64 / 255.0))
            .collect();
        let img = Image::new(3, 2, pixels).unwrap();
        save_image(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn png_save_then_load_preserves_eight_bit_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = Image::new(2, 1, vec![[0.0, 0.5, 1.0], [1.0 / 255.0, 0.0, 200.0 / 255.0]])
            .unwrap();
        save_image(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.get(1, 0), [1.0 / 255.0, 0.0, 200.0 / 255.0]);
        assert_eq!(back.get(0, 0)[2], 1.0);
    }

    #[test]
    fn unsupported_formats_are_named() {
        let err = decode_image(&[0xFF, 0xD8, 0xFF, 0xE0, 0x00]).unwrap_err();
        assert!(err.to_string().contains("JPEG"), "{err}");
        let err = decode_image(b"P3\n1 1\n255\n0 0 0\n").unwrap_err();
        assert!(err.to_string().contains("P6"), "{err}");
    }

    #[test]
    fn truncated_ppm_is_rejected() {
        let err = decode_image(b"P6\n2 2\n255\n\x00\x01").unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }
}
