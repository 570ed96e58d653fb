//! Command-line driver: one subcommand per pipeline stage, plus synthetic
//! scene generation and scoring.
//!
//! Every flag mirrors a [`RunConfig`] key; a `--config` TOML file supplies
//! defaults and explicit flags win. All outputs of a run land in one
//! directory with a `manifest.txt` listing content hashes; the manifest is
//! the only file allowed to mention elapsed time, so repeated runs stay
//! byte-comparable.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::colorize::{colorize_cloud, ColorizeParams, ColorizeResult, ImageContext};
use crate::geom::{
    estimate_normals, Aabb, GeomError, PointCloud, SimilarityTransform, TriangleMesh, Vec3,
};
use crate::imageproc::equalize_value_channel;
use crate::imageproc::Image;
use crate::ingest::{
    load_image, parse_bundler, parse_correspondences, parse_ply, save_image, write_ply,
    BundlerReconstruction, CoarseMode, IngestError, PlyEncoding, PlyGeometry, RunConfig,
};
use crate::projection::{
    full_mask, geometry_digest, mask_cache_key, render_gbuffer, write_depth_png16,
    write_mask_png16, Camera, MaskCache, MaskParams, ProjectionError, Surface,
};
use crate::registration::{
    coarse_align_bbox, coarse_align_correspondences, parse_transform, run_sicp, write_transform,
    RegistrationError, SicpConfig, SicpReport,
};
use crate::synth::{
    generate_scene, perturb_scene, preset, random_similarity, score_colors, transform_errors,
    write_scene, Perturbation, SynthError,
};

/// Environment fallback for `--cache-dir`.
pub const CACHE_DIR_ENV: &str = "SCANPAINT_CACHE_DIR";

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for usage or input problems, 2 when the numerics break down.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Missing or malformed inputs; exit code 1.
    Input(String),
    /// The inputs parsed but the math gave up; exit code 2.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RegistrationError> for CliError {
    fn from(e: RegistrationError) -> Self {
        match e {
            RegistrationError::InsufficientCorrespondences(_)
            | RegistrationError::TransformParse { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::BadSpec(_) | SynthError::Ingest(_) | SynthError::Io(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "scanpaint",
    version,
    about = "Registers a photo-based reconstruction to a dense scan and paints the photos onto it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equalize each photo's value channel into a new directory of PNGs.
    Enhance(EnhanceCmd),
    /// Align the reconstruction's sparse cloud to the scan.
    Register(PipelineCmd),
    /// Dump each photo's quality mask and depth map as 16-bit PNGs.
    Masks(PipelineCmd),
    /// Paint the scan using an already-saved transform.
    Colorize(PipelineCmd),
    /// Register, then paint: the full pipeline.
    Fuse(PipelineCmd),
    /// Generate a synthetic scene with known ground truth.
    Synth(SynthCmd),
    /// Score a painted run against a synthetic scene's truth.
    Eval(EvalCmd),
}

#[derive(Args)]
struct EnhanceCmd {
    /// Directory of input photos.
    #[arg(long, value_name = "DIR")]
    images: PathBuf,
    /// Directory the equalized PNGs are written into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineCmd {
    #[command(flatten)]
    input: InputFlags,
    #[command(flatten)]
    register: RegisterFlags,
    #[command(flatten)]
    paint: PaintFlags,
}

#[derive(Args)]
struct InputFlags {
    /// Dense scan, a PLY mesh or point cloud.
    #[arg(long, value_name = "PLY")]
    scan: Option<PathBuf>,
    /// Bundler v0.3 reconstruction file.
    #[arg(long, value_name = "FILE")]
    bundler: Option<PathBuf>,
    /// Directory of photos, matched to cameras in file-name order.
    #[arg(long, value_name = "DIR")]
    images: Option<PathBuf>,
    /// TOML run configuration; explicit flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory all outputs are written into.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegisterFlags {
    /// Initial alignment: bbox, corr, or file.
    #[arg(long, value_name = "MODE")]
    coarse: Option<CoarseMode>,
    /// Picked point pairs for `--coarse corr`, six numbers per line.
    #[arg(long, value_name = "FILE")]
    correspondences: Option<PathBuf>,
    /// Saved transform, for `--coarse file` and for `colorize`.
    #[arg(long, value_name = "FILE")]
    transform: Option<PathBuf>,
    /// Relative residual improvement that counts as converged.
    #[arg(long, value_name = "TOL")]
    sicp_tol: Option<f64>,
    /// Iteration cap for the refinement.
    #[arg(long, value_name = "N")]
    sicp_max_iter: Option<usize>,
    /// Rotation hypotheses tried before the full run; 0 disables them.
    #[arg(long, value_name = "N")]
    rotation_restarts: Option<usize>,
}

#[derive(Args)]
struct PaintFlags {
    /// Odd side length of the matching block.
    #[arg(long, value_name = "PX")]
    block_size: Option<usize>,
    /// Half-width of the displacement search window.
    #[arg(long, value_name = "PX")]
    search_radius: Option<usize>,
    /// How many of the best-weighted photos blend into each point.
    #[arg(long, value_name = "K")]
    best_k: Option<usize>,
    /// Depth slack when testing visibility; defaults to 0.5% of the scan's
    /// bounding-box diagonal.
    #[arg(long, value_name = "DIST")]
    visibility_eps: Option<f64>,
    /// Pixel radius of point splats when the scan is a bare cloud.
    #[arg(long, value_name = "PX")]
    splat_radius: Option<usize>,
    /// Distance (pixels) over which depth-border influence fades out.
    #[arg(long, value_name = "PX")]
    border_delta: Option<f64>,
    /// Depth jump, as a fraction of a view's depth range, treated as a
    /// silhouette.
    #[arg(long, value_name = "FRAC")]
    depth_frac: Option<f64>,
    /// Blend raw projections without block-matching correction.
    #[arg(long)]
    no_correction: bool,
    /// Mask cache directory; SCANPAINT_CACHE_DIR works too.
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Seed for randomized steps (the default pipeline is deterministic).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthCmd {
    /// Scene preset: desk, sphere, or plane.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Directory the scene files are written into.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Seed for surface jitter and texture.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Pose the reconstruction frame with a random similarity drawn from
    /// this seed; without it the frames coincide.
    #[arg(long, value_name = "N")]
    truth_seed: Option<u64>,
    /// Shift this camera's believed principal point by --shift-dx/--shift-dy.
    #[arg(long, value_name = "CAM")]
    shift_camera: Option<usize>,
    #[arg(long, default_value_t = 0.0, value_name = "PX")]
    shift_dx: f64,
    #[arg(long, default_value_t = 0.0, value_name = "PX")]
    shift_dy: f64,
    /// Tilt this camera's believed pose by --tilt-mrad.
    #[arg(long, value_name = "CAM")]
    tilt_camera: Option<usize>,
    #[arg(long, default_value_t = 0.0, value_name = "MRAD")]
    tilt_mrad: f64,
    /// Gaussian noise of this sigma on the believed sparse points.
    #[arg(long, value_name = "SIGMA")]
    noise_sigma: Option<f64>,
    /// Seed for the perturbation draws.
    #[arg(long, default_value_t = 1, value_name = "N")]
    perturb_seed: u64,
}

#[derive(Args)]
struct EvalCmd {
    /// Directory a colorize or fuse run wrote.
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Scene directory written by synth.
    #[arg(long, value_name = "DIR")]
    scene: PathBuf,
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Enhance(cmd) => cmd_enhance(cmd),
        Command::Register(cmd) => cmd_register(cmd),
        Command::Masks(cmd) => cmd_masks(cmd),
        Command::Colorize(cmd) => cmd_colorize(cmd),
        Command::Fuse(cmd) => cmd_fuse(cmd),
        Command::Synth(cmd) => cmd_synth(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
    }
}

// ---- configuration -------------------------------------------------------

fn merged_config(cmd: &PipelineCmd) -> Result<RunConfig, CliError> {
    let mut cfg = match &cmd.input.config {
        Some(path) => RunConfig::load(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    let i = &cmd.input;
    if let Some(v) = &i.scan {
        cfg.scan = Some(v.clone());
    }
    if let Some(v) = &i.bundler {
        cfg.bundler = Some(v.clone());
    }
    if let Some(v) = &i.images {
        cfg.images = Some(v.clone());
    }
    if let Some(v) = &i.out {
        cfg.output = Some(v.clone());
    }
    let r = &cmd.register;
    if let Some(v) = r.coarse {
        cfg.coarse = v;
    }
    if let Some(v) = &r.correspondences {
        cfg.correspondences = Some(v.clone());
    }
    if let Some(v) = &r.transform {
        cfg.transform = Some(v.clone());
    }
    if let Some(v) = r.sicp_tol {
        cfg.sicp_tolerance = v;
    }
    if let Some(v) = r.sicp_max_iter {
        cfg.sicp_max_iterations = v;
    }
    if let Some(v) = r.rotation_restarts {
        cfg.rotation_restarts = v;
    }
    let p = &cmd.paint;
    if let Some(v) = p.block_size {
        cfg.block_size = v;
    }
    if let Some(v) = p.search_radius {
        cfg.search_radius = v;
    }
    if let Some(v) = p.best_k {
        cfg.best_k = v;
    }
    if let Some(v) = p.visibility_eps {
        cfg.visibility_epsilon = Some(v);
    }
    if let Some(v) = p.splat_radius {
        cfg.splat_radius = v;
    }
    if let Some(v) = p.border_delta {
        cfg.border_delta = v;
    }
    if let Some(v) = p.depth_frac {
        cfg.depth_discontinuity_fraction = v;
    }
    if p.no_correction {
        cfg.correction = false;
    }
    if let Some(v) = &p.cache_dir {
        cfg.cache_dir = Some(v.clone());
    }
    if let Some(v) = p.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_path<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Input(format!("{flag} is required for this subcommand")))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

// ---- input loading -------------------------------------------------------

struct PipelineInputs {
    scan: PlyGeometry,
    recon: BundlerReconstruction,
    /// One photo per reconstruction camera; empty when images were not
    /// requested.
    photos: Vec<Image>,
}

/// Image files of a directory in name order, ignoring dotfiles and the
/// `.txt` sidecars the mask dump writes.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && !p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_none_or(|n| n.starts_with('.') || n.ends_with(".txt"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("no image files in {}", dir.display())));
    }
    Ok(files)
}

fn load_inputs(cfg: &RunConfig, need_images: bool) -> Result<PipelineInputs, CliError> {
    let scan_path = require_path(&cfg.scan, "--scan")?;
    let scan = with_path(scan_path, parse_ply(&read_bytes(scan_path)?))?;

    let (dims, photos) = match &cfg.images {
        Some(dir) => {
            let files = list_images(dir)?;
            let mut photos = Vec::with_capacity(files.len());
            for f in &files {
                photos.push(with_path(f, load_image(f))?);
            }
            let dims: Vec<(usize, usize)> =
                photos.iter().map(|p| (p.width(), p.height())).collect();
            (dims, photos)
        }
        None if !need_images => (vec![(2, 2)], Vec::new()),
        None => return Err(CliError::Input("--images is required for this subcommand".into())),
    };

    let bundler_path = require_path(&cfg.bundler, "--bundler")?;
    let recon = with_path(bundler_path, parse_bundler(&read_bytes(bundler_path)?, &dims))?;
    if need_images && photos.len() != recon.cameras.len() {
        return Err(CliError::Input(format!(
            "{} photos in {} but the reconstruction lists {} cameras",
            photos.len(),
            cfg.images.as_deref().unwrap_or(Path::new("?")).display(),
            recon.cameras.len()
        )));
    }
    Ok(PipelineInputs { scan, recon, photos })
}

// ---- registration --------------------------------------------------------

fn coarse_initial(
    cfg: &RunConfig,
    recon: &BundlerReconstruction,
    scan: &PlyGeometry,
) -> Result<SimilarityTransform, CliError> {
    match cfg.coarse {
        CoarseMode::Bbox => Ok(coarse_align_bbox(&recon.sparse, scan.vertices())?),
        CoarseMode::Corr => {
            let path = require_path(&cfg.correspondences, "--correspondences")?;
            let pairs = with_path(path, parse_correspondences(&read_text(path)?))?;
            Ok(coarse_align_correspondences(&pairs)?)
        }
        CoarseMode::File => {
            let path = require_path(&cfg.transform, "--transform")?;
            Ok(parse_transform(&read_text(path)?)?)
        }
    }
}

fn register(
    cfg: &RunConfig,
    recon: &BundlerReconstruction,
    scan: &PlyGeometry,
) -> Result<SicpReport, CliError> {
    let init = coarse_initial(cfg, recon, scan)?;
    let sicp = SicpConfig {
        tolerance: cfg.sicp_tolerance,
        max_iterations: cfg.sicp_max_iterations,
        rotation_restarts: cfg.rotation_restarts,
        ..SicpConfig::default()
    };
    Ok(run_sicp(&recon.sparse, scan.vertices(), &init, &sicp)?)
}

fn registration_report(cfg: &RunConfig, report: &SicpReport, out: &mut String) {
    out.push_str(&format!("coarse {}\n", cfg.coarse));
    out.push_str(&format!("iterations {}\n", report.iterations));
    out.push_str(&format!("converged {}\n", report.converged));
    if let Some(last) = report.rmse_trace.last() {
        out.push_str(&format!("final_rmse {last}\n"));
    }
    out.push_str("rmse_trace\n");
    for (i, r) in report.rmse_trace.iter().enumerate() {
        out.push_str(&format!("  {} {r}\n", i + 1));
    }
}

// ---- painting ------------------------------------------------------------

/// Scan geometry with whatever normals painting needs: meshes keep their
/// faces, bare clouds get normals estimated from their 16 nearest
/// neighbors, oriented toward the mean camera position.
enum ScanGeometry {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

impl ScanGeometry {
    fn prepare(scan: PlyGeometry, cameras: &[Camera]) -> Result<Self, CliError> {
        match scan {
            PlyGeometry::Mesh(m) => Ok(ScanGeometry::Mesh(m)),
            PlyGeometry::Cloud(c) if c.normals().is_some() => Ok(ScanGeometry::Cloud(c)),
            PlyGeometry::Cloud(c) => {
                let viewpoint = match cameras.len() {
                    0 => None,
                    n => Some(
                        cameras.iter().map(Camera::center).sum::<Vec3>() / n as f64,
                    ),
                };
                let with_normals = estimate_normals(&c, 16, viewpoint).map_err(|e| {
                    CliError::Numerical(format!("normal estimation on the scan failed: {e}"))
                })?;
                Ok(ScanGeometry::Cloud(with_normals))
            }
        }
    }

    fn points(&self) -> &[Vec3] {
        match self {
            ScanGeometry::Mesh(m) => m.vertices().points(),
            ScanGeometry::Cloud(c) => c.points(),
        }
    }

    fn surface(&self, splat_radius: usize) -> Surface<'_> {
        match self {
            ScanGeometry::Mesh(m) => Surface::Mesh(m),
            ScanGeometry::Cloud(c) => Surface::Cloud { cloud: c, splat_radius },
        }
    }

    /// Cache identity of the rendered geometry: positions and normals via
    /// the digest, plus the face list folded into the kind tag.
    fn cache_identity(&self) -> (String, [u8; 32]) {
        match self {
            ScanGeometry::Mesh(m) => {
                let mut hasher = Sha256::new();
                hasher.update((m.faces().len() as u64).to_le_bytes());
                for f in m.faces() {
                    for &i in f {
                        hasher.update((i as u64).to_le_bytes());
                    }
                }
                let faces: [u8; 32] = hasher.finalize().into();
                let tag: String = faces[..8].iter().map(|b| format!("{b:02x}")).collect();
                let normals = m.vertex_normals();
                (format!("full-mesh-{tag}"), geometry_digest(m.vertices().points(), Some(&normals)))
            }
            ScanGeometry::Cloud(c) => {
                ("full-cloud".into(), geometry_digest(c.points(), c.normals()))
            }
        }
    }

    fn colored_ply(&self, colors: Vec<[f64; 3]>) -> Result<PlyGeometry, CliError> {
        let recolor = |cloud: &PointCloud| -> Result<PointCloud, GeomError> {
            let mut out = PointCloud::new(cloud.points().to_vec())?;
            if let Some(normals) = cloud.normals() {
                out = out.with_normals(normals.to_vec())?;
            }
            out.with_colors(colors.clone())
        };
        Ok(match self {
            ScanGeometry::Mesh(m) => {
                PlyGeometry::Mesh(m.map_vertices(recolor(m.vertices())?).map_err(GeomError::from)?)
            }
            ScanGeometry::Cloud(c) => PlyGeometry::Cloud(recolor(c)?),
        })
    }
}

fn cache_from(cfg: &RunConfig) -> Result<Option<MaskCache>, CliError> {
    let dir = cfg
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from));
    match dir {
        Some(dir) => MaskCache::open(&dir)
            .map(Some)
            .map_err(|e| CliError::Input(format!("cache dir {}: {e}", dir.display()))),
        None => Ok(None),
    }
}

struct PaintSetup {
    contexts: Vec<ImageContext>,
    /// Reconstruction camera index behind each context.
    camera_indices: Vec<usize>,
    visibility_epsilon: f64,
}

fn build_contexts(
    cfg: &RunConfig,
    geometry: &ScanGeometry,
    recon: &BundlerReconstruction,
    photos: &[Image],
    t: &SimilarityTransform,
) -> Result<PaintSetup, CliError> {
    let mask_params = MaskParams {
        border_delta: cfg.border_delta,
        depth_discontinuity_frac: cfg.depth_discontinuity_fraction,
    };
    let cache = cache_from(cfg)?;
    let (kind, digest) = geometry.cache_identity();

    let mut contexts = Vec::new();
    let mut camera_indices = Vec::new();
    for (idx, cam) in recon.cameras.iter().enumerate() {
        let Some(cam) = cam else { continue };
        let cam = cam.transformed(t);
        let gbuf = render_gbuffer(geometry.surface(cfg.splat_radius), &cam);
        let key = mask_cache_key(&kind, &cam, &digest, &mask_params, cfg.splat_radius);
        let mask = match cache.as_ref().and_then(|c| c.load(&key)) {
            Some(mask) => mask,
            None => {
                let mask = full_mask(&gbuf, &cam, &mask_params)?;
                if let Some(c) = &cache {
                    // Best effort: a full or read-only cache must not fail the run.
                    let _ = c.store(&key, &mask);
                }
                mask
            }
        };
        contexts.push(ImageContext { camera: cam, photo: photos[idx].clone(), mask, depth: gbuf.depth });
        camera_indices.push(idx);
    }
    if contexts.is_empty() {
        return Err(CliError::Input(
            "the reconstruction has no usable (nonzero-focal) camera".into(),
        ));
    }

    let visibility_epsilon = match cfg.visibility_epsilon {
        Some(eps) => eps,
        None => 0.005 * Aabb::from_points(geometry.points())?.diagonal(),
    };
    Ok(PaintSetup { contexts, camera_indices, visibility_epsilon })
}

fn paint(
    cfg: &RunConfig,
    geometry: &ScanGeometry,
    setup: &PaintSetup,
) -> (ColorizeResult, ColorizeParams) {
    let params = ColorizeParams {
        best_k: cfg.best_k,
        block_size: cfg.block_size,
        search_radius: cfg.search_radius,
        visibility_epsilon: setup.visibility_epsilon,
        correction: cfg.correction,
    };
    (colorize_cloud(geometry.points(), &setup.contexts, &params), params)
}

fn painting_report(
    params: &ColorizeParams,
    setup: &PaintSetup,
    result: &ColorizeResult,
    out: &mut String,
) {
    let colored = result.colored.iter().filter(|&&c| c).count();
    out.push_str(&format!("images_used {}\n", setup.contexts.len()));
    out.push_str(&format!("block_size {}\n", params.block_size));
    out.push_str(&format!("search_radius {}\n", params.search_radius));
    out.push_str(&format!("best_k {}\n", params.best_k));
    out.push_str(&format!("visibility_epsilon {}\n", params.visibility_epsilon));
    out.push_str(&format!("correction {}\n", params.correction));
    out.push_str(&format!("points {}\n", result.colors.len()));
    out.push_str(&format!("colored {colored}\n"));
    out.push_str(&format!("uncolored {}\n", result.colors.len() - colored));
    out.push_str(&format!("multi_view_points {}\n", result.work.multi_view_points));
    out.push_str(&format!("single_view_points {}\n", result.work.single_view_points));
    out.push_str(&format!("corrected_pairs {}\n", result.work.corrected_pairs));
    out.push_str(&format!("blocks_evaluated {}\n", result.work.blocks_evaluated));
    out.push_str(&format!("max_blocks_per_point {}\n", result.work.max_blocks_per_point));
    let hist: Vec<String> =
        result.displacement_histogram.iter().map(|c| c.to_string()).collect();
    out.push_str(&format!("displacement_histogram {}\n", hist.join(" ")));
}

// ---- run directory -------------------------------------------------------

struct RunDir {
    dir: PathBuf,
    started: Instant,
    hashes: Vec<(String, String)>,
}

impl RunDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), started: Instant::now(), hashes: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.hashes.push((sha256_hex(bytes), name.to_string()));
        Ok(())
    }

    /// Records a file some other writer already produced in the directory.
    fn note(&mut self, name: &str) -> Result<(), CliError> {
        let bytes = read_bytes(&self.dir.join(name))?;
        self.hashes.push((sha256_hex(&bytes), name.to_string()));
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `manifest.txt`; elapsed time lives here and nowhere else.
    fn finish(mut self) -> Result<(), CliError> {
        self.hashes.sort_by(|a, b| a.1.cmp(&b.1));
        let mut text = format!("elapsed_ms {}\n", self.started.elapsed().as_millis());
        for (hash, name) in &self.hashes {
            text.push_str(&format!("sha256 {hash}  {name}\n"));
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---- subcommands ---------------------------------------------------------

fn cmd_enhance(cmd: &EnhanceCmd) -> Result<(), CliError> {
    let files = list_images(&cmd.images)?;
    std::fs::create_dir_all(&cmd.out)
        .map_err(|e| CliError::Input(format!("{}: {e}", cmd.out.display())))?;
    for f in &files {
        let photo = with_path(f, load_image(f))?;
        let stem = f
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Input(format!("{}: unusable file name", f.display())))?;
        let target = cmd.out.join(format!("{stem}.png"));
        with_path(&target, save_image(&target, &equalize_value_channel(&photo)))?;
    }
    println!("equalized {} images into {}", files.len(), cmd.out.display());
    Ok(())
}

fn cmd_register(cmd: &PipelineCmd) -> Result<(), CliError> {
    let cfg = merged_config(cmd)?;
    let inputs = load_inputs(&cfg, false)?;
    let report = register(&cfg, &inputs.recon, &inputs.scan)?;

    let mut run = RunDir::create(require_path(&cfg.output, "--out")?)?;
    run.write("transform.txt", write_transform(&report.transform).as_bytes())?;
    let mut text = String::from("subcommand register\n");
    text.push_str(&format!("source_points {}\n", inputs.recon.sparse.len()));
    text.push_str(&format!("target_points {}\n", inputs.scan.vertices().len()));
    registration_report(&cfg, &report, &mut text);
    run.write("report.txt", text.as_bytes())?;
    run.finish()?;

    println!(
        "registered in {} iterations (converged {}, rmse {})",
        report.iterations,
        report.converged,
        report.rmse_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_masks(cmd: &PipelineCmd) -> Result<(), CliError> {
    let cfg = merged_config(cmd)?;
    let inputs = load_inputs(&cfg, true)?;
    let path = require_path(&cfg.transform, "--transform")?;
    let t = parse_transform(&read_text(path)?)?;
    let usable: Vec<Camera> = inputs.recon.cameras.iter().flatten().cloned().collect();
    let geometry = ScanGeometry::prepare(inputs.scan, &usable)?;
    let setup = build_contexts(&cfg, &geometry, &inputs.recon, &inputs.photos, &t)?;

    let mut run = RunDir::create(require_path(&cfg.output, "--out")?)?;
    for (ctx, &idx) in setup.contexts.iter().zip(&setup.camera_indices) {
        let mask_name = format!("mask_{idx:03}.png");
        let depth_name = format!("depth_{idx:03}.png");
        let io_err = |name: &str, e: std::io::Error| {
            CliError::Input(format!("{}: {e}", run.path(name).display()))
        };
        write_mask_png16(&run.path(&mask_name), &ctx.mask)
            .map_err(|e| io_err(&mask_name, e))?;
        write_depth_png16(&run.path(&depth_name), &ctx.depth)
            .map_err(|e| io_err(&depth_name, e))?;
        for name in [&mask_name, &depth_name] {
            run.note(name)?;
            run.note(&format!("{name}.txt"))?;
        }
    }
    let n = setup.contexts.len();
    run.finish()?;
    println!("dumped masks and depths for {n} cameras");
    Ok(())
}

fn run_painting(
    cmd: &PipelineCmd,
    refine: bool,
    subcommand: &str,
) -> Result<(), CliError> {
    let cfg = merged_config(cmd)?;
    let inputs = load_inputs(&cfg, true)?;

    let mut report_text = format!("subcommand {subcommand}\n");
    let t = if refine {
        let report = register(&cfg, &inputs.recon, &inputs.scan)?;
        registration_report(&cfg, &report, &mut report_text);
        report.transform
    } else {
        let path = require_path(&cfg.transform, "--transform")?;
        report_text.push_str("transform file\n");
        parse_transform(&read_text(path)?)?
    };

    let usable: Vec<Camera> = inputs.recon.cameras.iter().flatten().cloned().collect();
    let geometry = ScanGeometry::prepare(inputs.scan, &usable)?;
    let setup = build_contexts(&cfg, &geometry, &inputs.recon, &inputs.photos, &t)?;
    let (result, params) = paint(&cfg, &geometry, &setup);
    painting_report(&params, &setup, &result, &mut report_text);

    let colored = result.colored.iter().filter(|&&c| c).count();
    let total = result.colors.len();
    let mut run = RunDir::create(require_path(&cfg.output, "--out")?)?;
    run.write("transform.txt", write_transform(&t).as_bytes())?;
    let ply = geometry.colored_ply(result.colors)?;
    run.write("colored.ply", &write_ply(&ply, PlyEncoding::BinaryLittleEndian))?;
    run.write("report.txt", report_text.as_bytes())?;
    run.finish()?;

    println!("painted {colored} of {total} points");
    Ok(())
}

fn cmd_colorize(cmd: &PipelineCmd) -> Result<(), CliError> {
    run_painting(cmd, false, "colorize")
}

fn cmd_fuse(cmd: &PipelineCmd) -> Result<(), CliError> {
    run_painting(cmd, true, "fuse")
}

fn cmd_synth(cmd: &SynthCmd) -> Result<(), CliError> {
    let mut spec = preset(&cmd.preset, cmd.seed).ok_or_else(|| {
        CliError::Input(format!(
            "unknown preset \"{}\"; expected desk, sphere, or plane",
            cmd.preset
        ))
    })?;
    if let Some(truth_seed) = cmd.truth_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
        spec.truth = random_similarity(&mut rng, 0.25, 4.0);
    }
    let mut scene = generate_scene(&spec)?;
    if let Some(camera) = cmd.shift_camera {
        let mode = Perturbation::PrincipalShift { camera, dx: cmd.shift_dx, dy: cmd.shift_dy };
        scene = perturb_scene(&scene, mode, cmd.perturb_seed)?;
    }
    if let Some(camera) = cmd.tilt_camera {
        let mode = Perturbation::CameraRotation { camera, milliradians: cmd.tilt_mrad };
        scene = perturb_scene(&scene, mode, cmd.perturb_seed)?;
    }
    if let Some(sigma) = cmd.noise_sigma {
        scene = perturb_scene(&scene, Perturbation::PointNoise { sigma }, cmd.perturb_seed)?;
    }
    write_scene(&cmd.out, &scene)?;
    println!(
        "wrote {} scene with {} vertices and {} cameras to {}",
        spec.shape.name(),
        scene.mesh.vertices().len(),
        scene.cameras.len(),
        cmd.out.display()
    );
    Ok(())
}

fn cmd_eval(cmd: &EvalCmd) -> Result<(), CliError> {
    let run_ply = cmd.run.join("colored.ply");
    let truth_ply = cmd.scene.join("truth").join("colors.ply");
    let got = with_path(&run_ply, parse_ply(&read_bytes(&run_ply)?))?;
    let truth = with_path(&truth_ply, parse_ply(&read_bytes(&truth_ply)?))?;
    let got_colors = got
        .vertices()
        .colors()
        .ok_or_else(|| CliError::Input(format!("{}: no colors", run_ply.display())))?;
    let truth_colors = truth
        .vertices()
        .colors()
        .ok_or_else(|| CliError::Input(format!("{}: no colors", truth_ply.display())))?;
    if got_colors.len() != truth_colors.len() {
        return Err(CliError::Input(format!(
            "point counts differ: run has {}, truth has {}",
            got_colors.len(),
            truth_colors.len()
        )));
    }

    // The painter leaves unseen points at mid-gray, which the 8-bit PLY
    // color channel stores as exactly (128, 128, 128).
    let sentinel = [128.0 / 255.0; 3];
    let colored: Vec<bool> = got_colors.iter().map(|&c| c != sentinel).collect();
    let score = score_colors(got_colors, &colored, truth_colors);

    let got_t = parse_transform(&read_text(&cmd.run.join("transform.txt"))?)?;
    let truth_t =
        parse_transform(&read_text(&cmd.scene.join("truth").join("transform.txt"))?)?;
    let errors = transform_errors(&got_t, &truth_t);

    println!("scale_error_rel {}", errors.scale_rel);
    println!("rotation_error_rad {}", errors.rotation_radians);
    println!("translation_error {}", errors.translation);
    println!("colored {}", score.colored);
    println!("uncolored {}", score.uncolored);
    println!("color_mean {}", score.mean);
    println!("color_p95 {}", score.p95);
    println!("color_max {}", score.max);
    Ok(())
}
