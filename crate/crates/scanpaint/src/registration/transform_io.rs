//! Text files describing a similarity transform: a scale line, three
//! rotation rows, and a translation line. `#` starts a comment.

use nalgebra::Matrix3;

use crate::geom::{SimilarityTransform, Vec3};

use super::RegistrationError;

pub fn parse_transform(text: &str) -> Result<SimilarityTransform, RegistrationError> {
    let mut nums = Vec::with_capacity(13);
    let mut last_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("");
        for tok in body.split_ascii_whitespace() {
            let v: f64 = tok.parse().map_err(|_| RegistrationError::TransformParse {
                line,
                message: format!("expected a number, got \"{tok}\""),
            })?;
            if nums.len() == 13 {
                return Err(RegistrationError::TransformParse {
                    line,
                    message: "more than 13 numbers in transform file".into(),
                });
            }
            nums.push(v);
        }
    }
    if nums.len() != 13 {
        return Err(RegistrationError::TransformParse {
            line: last_line,
            message: format!("expected 13 numbers (scale, rotation rows, translation), got {}", nums.len()),
        });
    }
    let rotation = Matrix3::new(
        nums[1], nums[2], nums[3],
        nums[4], nums[5], nums[6],
        nums[7], nums[8], nums[9],
    );
    let translation = Vec3::new(nums[10], nums[11], nums[12]);
    Ok(SimilarityTransform::new(nums[0], rotation, translation)?)
}

pub fn write_transform(t: &SimilarityTransform) -> String {
    use std::fmt::Write;

    let r = t.rotation();
    let tr = t.translation();
    let mut out = String::from("# similarity: target = scale * R * source + t\n");
    let _ = writeln!(out, "{}", t.scale());
    for i in 0..3 {
        let _ = writeln!(out, "{} {} {}", r[(i, 0)], r[(i, 1)], r[(i, 2)]);
    }
    let _ = writeln!(out, "{} {} {}", tr.x, tr.y, tr.z);
    out
}
