use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::geom::Vec3;

use super::camera::Camera;
use super::masks::{MaskParams, QualityMask};

const MAGIC: &[u8; 8] = b"SPMASK1\n";

/// Digest of point positions and normals, used to key cached masks to the
/// exact geometry they were rendered from.
pub fn geometry_digest(points: &[Vec3], normals: Option<&[Vec3]>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((points.len() as u64).to_le_bytes());
    for p in points {
        for c in 0..3 {
            hasher.update(p[c].to_le_bytes());
        }
    }
    if let Some(normals) = normals {
        hasher.update(b"n");
        for n in normals {
            for c in 0..3 {
                hasher.update(n[c].to_le_bytes());
            }
        }
    }
    hasher.finalize().into()
}

/// Content key for one mask: every input that can change the pixels goes
/// into the hash, so a key collision means the cached bytes are reusable.
pub fn mask_cache_key(
    kind: &str,
    cam: &Camera,
    geometry: &[u8; 32],
    params: &MaskParams,
    splat_radius: usize,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_bytes());
    hasher.update([0]);
    hasher.update(cam.focal().to_le_bytes());
    hasher.update(cam.k1().to_le_bytes());
    hasher.update(cam.k2().to_le_bytes());
    for v in cam.rotation().iter() {
        hasher.update(v.to_le_bytes());
    }
    for c in 0..3 {
        hasher.update(cam.translation()[c].to_le_bytes());
    }
    hasher.update((cam.width() as u64).to_le_bytes());
    hasher.update((cam.height() as u64).to_le_bytes());
    let (cx, cy) = cam.principal_point();
    hasher.update(cx.to_le_bytes());
    hasher.update(cy.to_le_bytes());
    hasher.update(geometry);
    hasher.update(params.border_delta.to_le_bytes());
    hasher.update(params.depth_discontinuity_frac.to_le_bytes());
    hasher.update((splat_radius as u64).to_le_bytes());
    let digest = hasher.finalize();
    let mut key = String::with_capacity(64);
    for byte in digest {
        key.push_str(&format!("{byte:02x}"));
    }
    key
}

/// On-disk store of full-precision masks so an interrupted or repeated
/// colorize run skips re-rendering.
///
/// Entries are written to a temporary file and renamed into place, so
/// concurrent writers of the same key are safe and readers never observe a
/// partial mask.
#[derive(Debug, Clone)]
pub struct MaskCache {
    dir: PathBuf,
}

impl MaskCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.mask"))
    }

    /// Loads a cached mask; a missing or corrupt entry reads as a miss.
    pub fn load(&self, key: &str) -> Option<QualityMask> {
        read_mask_file(&self.entry_path(key)).ok()
    }

    pub fn store(&self, key: &str, mask: &QualityMask) -> io::Result<()> {
        let final_path = self.entry_path(key);
        let tmp_path = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = std::fs::File::create(&tmp_path)?;
            f.write_all(MAGIC)?;
            f.write_all(&(mask.width() as u64).to_le_bytes())?;
            f.write_all(&(mask.height() as u64).to_le_bytes())?;
            let mut payload = Vec::with_capacity(mask.weights().len() * 8);
            for w in mask.weights() {
                payload.extend_from_slice(&w.to_le_bytes());
            }
            f.write_all(&payload)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp_path, &final_path)?;
        Ok(())
    }
}

fn read_mask_file(path: &Path) -> io::Result<QualityMask> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < MAGIC.len() + 16 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a mask cache entry"));
    }
    let mut off = MAGIC.len();
    let mut read_u64 = |bytes: &[u8]| {
        let v = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        v as usize
    };
    let width = read_u64(&bytes);
    let height = read_u64(&bytes);
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("mask dimensions overflow"))?;
    if bytes.len() != off + expected {
        return Err(bad("mask payload truncated"));
    }
    let weights: Vec<f64> = bytes[off..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    QualityMask::new(width, height, weights).map_err(|e| bad(&e.to_string()))
}
