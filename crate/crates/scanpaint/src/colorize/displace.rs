//! Local block-matching between a reference photo and a candidate photo.
//!
//! Small calibration and registration errors make the same surface point
//! land a few pixels apart in different photos. Before blending, each
//! candidate view is searched in a window around its predicted pixel for
//! the offset whose neighborhood best matches the reference view's
//! neighborhood, comparing mean-free blocks so exposure differences
//! between photos do not register as misalignment.

use crate::imageproc::{match_error, Block, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub dx: i32,
    pub dy: i32,
    /// Mean-free matching error of the winning block pair.
    pub error: f64,
    /// Candidate blocks actually scored.
    pub evaluated: u64,
}

struct Candidate {
    dx: i32,
    dy: i32,
    error: f64,
    center_gap: f64,
}

/// Ordering for equally scored blocks: closer center color wins, then the
/// shorter offset, then the lexicographically smaller one. The chain keeps
/// the result independent of scan order.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.error != b.error {
        return a.error < b.error;
    }
    if a.center_gap != b.center_gap {
        return a.center_gap < b.center_gap;
    }
    let (al, bl) = (a.dx.abs() + a.dy.abs(), b.dx.abs() + b.dy.abs());
    if al != bl {
        return al < bl;
    }
    (a.dx, a.dy) < (b.dx, b.dy)
}

fn rgb_gap(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

/// Searches the `(2r+1)^2` offsets around `cand_center` for the block most
/// like the one at `ref_center`. `None` when the reference center lies
/// outside its image or no offset lands a block in the candidate image.
pub fn find_displacement(
    reference: &Image,
    ref_center: (i64, i64),
    candidate: &Image,
    cand_center: (i64, i64),
    block_size: usize,
    search_radius: i32,
) -> Option<Displacement> {
    let ref_block = Block::from_image(reference, ref_center.0, ref_center.1, block_size)
        .expect("validated block size")?;
    let ref_color = reference.get_clamped(ref_center.0, ref_center.1);

    let mut best: Option<Candidate> = None;
    let mut evaluated = 0;
    for dy in -search_radius..=search_radius {
        for dx in -search_radius..=search_radius {
            let cx = cand_center.0 + dx as i64;
            let cy = cand_center.1 + dy as i64;
            let Some(block) = Block::from_image(candidate, cx, cy, block_size)
                .expect("validated block size")
            else {
                continue;
            };
            evaluated += 1;
            let cand = Candidate {
                dx,
                dy,
                error: match_error(&ref_block, &block).expect("equal block sides"),
                center_gap: rgb_gap(ref_color, candidate.get_clamped(cx, cy)),
            };
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                best = Some(cand);
            }
        }
    }
    best.map(|c| Displacement { dx: c.dx, dy: c.dy, error: c.error, evaluated })
}
