use super::color::{hsv_to_rgb, rgb_to_hsv};
use super::Image;

const BINS: usize = 256;

/// Histogram-equalizes the HSV value channel, leaving hue and saturation
/// untouched.
///
/// Values are binned into 256 levels and remapped through the inclusive
/// normalized CDF, so the brightest occupied bin always maps to 1.0. An
/// image whose values all fall into one bin has no contrast to spread and
/// is returned unchanged.
pub fn equalize_value_channel(image: &Image) -> Image {
    let hsv: Vec<[f64; 3]> = image.pixels().iter().map(|&p| rgb_to_hsv(p)).collect();

    let mut counts = [0u64; BINS];
    for p in &hsv {
        counts[bin(p[2])] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return image.clone();
    }

    let total = image.pixels().len() as f64;
    let mut lut = [0.0f64; BINS];
    let mut cumulative = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        cumulative += c;
        lut[i] = cumulative as f64 / total;
    }

    let pixels = hsv
        .into_iter()
        .map(|[h, s, v]| hsv_to_rgb([h, s, lut[bin(v)]]))
        .map(|rgb| rgb.map(|c| c.clamp(0.0, 1.0)))
        .collect();
    Image::new(image.width(), image.height(), pixels).expect("dimensions unchanged")
}

fn bin(v: f64) -> usize {
    ((v * BINS as f64) as usize).min(BINS - 1)
}
