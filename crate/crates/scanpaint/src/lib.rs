//! Paints photographic color onto dense 3D scans.
//!
//! The pipeline aligns a photogrammetry reconstruction (cameras plus a sparse
//! point cloud, Bundler format) to a dense scan with a scale-aware variant of
//! ICP, then projects the photos onto the scan: every image gets per-pixel
//! quality weights (viewing angle, depth, distance to depth borders), each
//! point picks its best few images, small projection misalignments are
//! corrected by block matching, and the surviving samples are blended into a
//! per-point color.
//!
//! Modules follow the pipeline order:
//!
//! * [`geom`] — clouds, meshes, similarity transforms, normals, exact NN.
//! * [`ingest`] — PLY / Bundler / correspondence / image / config parsing.
//! * [`imageproc`] — color spaces, value-channel equalization, block matching.
//! * [`registration`] — coarse alignment and scale-ICP.
//! * [`projection`] — cameras, depth maps, quality masks.
//! * [`colorize`] — image selection, displacement correction, blending.
//! * [`synth`] — synthetic scenes, an independent ray-cast renderer, scoring.

pub mod cli;
pub mod colorize;
pub mod geom;
pub mod imageproc;
pub mod ingest;
pub mod projection;
pub mod registration;
pub mod synth;
