//! File-format frontends: PLY geometry, Bundler reconstructions, 3D-3D
//! correspondence lists, photo loading, and the run configuration.

mod bundler;
mod config;
mod correspondences;
mod image_io;
mod ply;

pub use bundler::{parse_bundler, write_bundler, BundlerReconstruction, BundlerView};
pub use config::{CoarseMode, RunConfig};
pub use correspondences::{parse_correspondences, write_correspondences};
pub use image_io::{decode_image, encode_ppm, load_image, save_image};
pub use ply::{parse_ply, write_ply, PlyEncoding, PlyGeometry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("PLY line {line}: {message}")]
    PlyParse { line: usize, message: String },
    #[error("PLY data truncated while reading {context}")]
    PlyTruncated { context: String },
    #[error("Bundler line {line}: {message}")]
    BundlerParse { line: usize, message: String },
    #[error("Bundler camera {index}: {source}")]
    BundlerCamera { index: usize, source: crate::projection::ProjectionError },
    #[error("expected image dimensions for {cameras} cameras, got {got} entries")]
    DimensionCountMismatch { cameras: usize, got: usize },
    #[error("correspondence line {line}: {message}")]
    CorrespondenceParse { line: usize, message: String },
    #[error("unsupported image format: {0}")]
    UnsupportedImageFormat(String),
    #[error("image decode failed: {0}")]
    ImageDecode(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] crate::geom::GeomError),
    #[error(transparent)]
    Image(#[from] crate::imageproc::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
