//! Plain-text 3D-3D correspondence lists: six numbers per line, the
//! source point followed by the matching target point. Blank lines are
//! skipped and `#` starts a comment.

use crate::geom::Vec3;

use super::IngestError;

pub fn parse_correspondences(text: &str) -> Result<Vec<(Vec3, Vec3)>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_ascii_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 6 {
            return Err(IngestError::CorrespondenceParse {
                line,
                message: format!("expected 6 numbers, got {}", toks.len()),
            });
        }
        let mut vals = [0.0f64; 6];
        for (v, tok) in vals.iter_mut().zip(&toks) {
            *v = tok.parse().map_err(|_| IngestError::CorrespondenceParse {
                line,
                message: format!("expected a number, got \"{tok}\""),
            })?;
            if !v.is_finite() {
                return Err(IngestError::CorrespondenceParse {
                    line,
                    message: format!("non-finite value \"{tok}\""),
                });
            }
        }
        out.push((
            Vec3::new(vals[0], vals[1], vals[2]),
            Vec3::new(vals[3], vals[4], vals[5]),
        ));
    }
    Ok(out)
}

pub fn write_correspondences(pairs: &[(Vec3, Vec3)]) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    for (s, t) in pairs {
        let _ = writeln!(out, "{} {} {} {} {} {}", s.x, s.y, s.z, t.x, t.y, t.z);
    }
    out
}
