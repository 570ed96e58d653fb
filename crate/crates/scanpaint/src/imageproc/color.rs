//! Color space conversions used by equalization (HSV) and block matching
//! (YCbCr, BT.601 studio swing on the 0–255 scale).

/// RGB in [0,1] to hexcone HSV: hue in degrees [0, 360), saturation and
/// value in [0, 1]. Hue of a gray pixel is 0 by convention.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let saturation = if max == 0.0 { 0.0 } else { delta / max };
    [hue, saturation, max]
}

/// Inverse of [`rgb_to_hsv`].
pub fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let c = v * s;
    let sector = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (sector % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match sector as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r1 + m, g1 + m, b1 + m]
}

/// RGB in [0,1] to BT.601 studio-swing YCbCr on the 0–255 scale:
/// Y in [16, 235], Cb and Cr centered at 128.
pub fn rgb_to_ycbcr(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    [
        16.0 + 65.481 * r + 128.553 * g + 24.966 * b,
        128.0 - 37.797 * r - 74.203 * g + 112.0 * b,
        128.0 + 112.0 * r - 93.786 * g - 18.214 * b,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primary_colors_map_to_known_hsv() {
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv([0.0, 1.0, 0.0]), [120.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv([0.0, 0.0, 1.0]), [240.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv([0.5, 0.5, 0.5]), [0.0, 0.0, 0.5]);
        assert_eq!(rgb_to_hsv([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn hsv_round_trips_random_colors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let rgb = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let back = hsv_to_rgb(rgb_to_hsv(rgb));
            for ch in 0..3 {
                assert!((back[ch] - rgb[ch]).abs() < 1e-6, "{rgb:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn ycbcr_hits_studio_swing_anchors() {
        let white = rgb_to_ycbcr([1.0, 1.0, 1.0]);
        assert!((white[0] - 235.0).abs() < 1e-9);
        assert!((white[1] - 128.0).abs() < 1e-9);
        assert!((white[2] - 128.0).abs() < 1e-9);

        let black = rgb_to_ycbcr([0.0, 0.0, 0.0]);
        assert_eq!(black, [16.0, 128.0, 128.0]);

        let gray = rgb_to_ycbcr([0.5, 0.5, 0.5]);
        assert!((gray[0] - 125.5).abs() < 1e-9);
        assert!((gray[1] - 128.0).abs() < 1e-9);
        assert!((gray[2] - 128.0).abs() < 1e-9);
    }

    #[test]
    fn luma_is_monotone_in_brightness() {
        let darker = rgb_to_ycbcr([0.2, 0.4, 0.1]);
        let brighter = rgb_to_ycbcr([0.3, 0.5, 0.2]);
        assert!(brighter[0] > darker[0]);
    }
}
