//! Command-line front end for the splat renderer and pruning laboratory.
//!
//! Subcommands cover the full experimental loop: `gen` makes synthetic
//! scenes, `render` draws them, `score` rates primitives from recorded
//! contributions, `prune` drops the low scorers, `eval` measures quality,
//! and `sweep` runs prune/eval grids.
//!
//! Exit codes: 0 on success, 2 for usage or input validation problems, 3
//! when writing results fails. Diagnostics go to stderr prefixed `error:`.
//! Flags beat `SPLATPRUNE_*` environment variables, which beat defaults.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use splatprune_core::image::Image;
use splatprune_core::io;
use splatprune_core::math::Vec3;
use splatprune_core::metrics::{benchmark_fps, psnr, ssim, MetricsReport, PerViewMetrics};
use splatprune_core::model::{CameraView, Color, Scene};
use splatprune_core::pruning::{
    apply_mask, prune_cross_ratio, prune_cross_stochastic, prune_cross_threshold,
    prune_pixelwise, PruneMask, PruneSpec, PruneTechnique,
};
use splatprune_core::rasterizer::{record_streams, render, ContributionStream, RenderOptions};
use splatprune_core::scoring::{
    aggregate_cross_view, rank_per_ray, Aggregation, RankedStreams, ScoreFunctionId,
    ScoreOptions, ScorePlan,
};
use splatprune_core::synthetic::{gen_camera_ring, gen_ground_truth, gen_scene, SynthSpec};
use splatprune_core::with_worker_count;

#[derive(Parser)]
#[command(
    name = "splatprune",
    version,
    about = "Render, score, prune, and evaluate Gaussian-splat scenes",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for rendering and scoring (0 = all cores).
    #[arg(long, global = true, env = "SPLATPRUNE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render every camera view to a PNG plus a manifest.
    Render(RenderArgs),
    /// Score primitives from their recorded ray contributions.
    Score(ScoreArgs),
    /// Drop primitives using a score table or per-ray ranking.
    Prune(PruneArgs),
    /// Measure PSNR, SSIM, and FPS against ground-truth images.
    Eval(EvalArgs),
    /// Prune and evaluate across a grid of settings.
    Sweep(SweepArgs),
    /// Generate a synthetic scene, camera ring, and ground truth.
    Gen(GenArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Scene checkpoint (binary PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Camera definitions (JSON).
    #[arg(long)]
    cameras: PathBuf,
    /// Output directory for the PNGs and render_manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Square tile edge in pixels.
    #[arg(long, env = "SPLATPRUNE_TILE_SIZE", default_value_t = 16,
          value_parser = clap::value_parser!(u32).range(1..))]
    tile_size: u32,
    /// Background color as `r,g,b` with each channel in [0, 1].
    #[arg(long, env = "SPLATPRUNE_BACKGROUND", default_value = "0,0,0",
          value_parser = parse_background)]
    background: [f32; 3],
    /// Also write per-ray contribution streams to streams.json.
    #[arg(long)]
    record: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Scene checkpoint (binary PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Camera definitions (JSON).
    #[arg(long)]
    cameras: PathBuf,
    /// Ground-truth image directory, named after each camera. Required by
    /// the color-aware functions (v8..v18).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Score function: lg, ms, rs, eg, or v1..v18.
    #[arg(long = "fn")]
    function: String,
    /// Aggregation across rays and views (default: the function's own).
    #[arg(long)]
    agg: Option<AggChoice>,
    /// Output path: a CSV (plus JSON sidecar) for cross-view tables, a
    /// JSON archive for per-ray rankings.
    #[arg(long)]
    out: PathBuf,
    /// Divisor applied to pixel-to-splat-center distances.
    #[arg(long, env = "SPLATPRUNE_DIST_SCALE", default_value_t = 1.0)]
    dist_scale: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggChoice {
    Sum,
    Max,
    Perray,
}

#[derive(Args)]
struct PruneArgs {
    /// Cross-view score table CSV (cross_* techniques).
    #[arg(long, conflicts_with = "ranked")]
    scores: Option<PathBuf>,
    /// Per-ray ranking JSON (pixelwise_topk).
    #[arg(long)]
    ranked: Option<PathBuf>,
    #[arg(long)]
    technique: TechniqueChoice,
    /// Ratio for cross_ratio/cross_stochastic, threshold for
    /// cross_threshold, per-ray rank for pixelwise_topk.
    #[arg(long)]
    value: f64,
    /// RNG seed (required by cross_stochastic).
    #[arg(long)]
    seed: Option<u64>,
    /// Scene checkpoint the scores refer to.
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for pruned.ply, mask.csv, and mask.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TechniqueChoice {
    #[value(name = "cross_ratio")]
    CrossRatio,
    #[value(name = "cross_threshold")]
    CrossThreshold,
    #[value(name = "cross_stochastic")]
    CrossStochastic,
    #[value(name = "pixelwise_topk")]
    PixelwiseTopk,
}

#[derive(Args)]
struct EvalArgs {
    /// Scene checkpoint (binary PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Camera definitions (JSON).
    #[arg(long)]
    cameras: PathBuf,
    /// Directory of ground-truth PNGs named after each camera.
    #[arg(long = "gt-images")]
    gt_images: PathBuf,
    /// Report path; `.csv` writes a one-row CSV, anything else JSON.
    #[arg(long)]
    out: PathBuf,
    /// Timed render passes per view for the FPS figure.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    fps_repeats: u32,
    /// Square tile edge in pixels.
    #[arg(long, env = "SPLATPRUNE_TILE_SIZE", default_value_t = 16,
          value_parser = clap::value_parser!(u32).range(1..))]
    tile_size: u32,
    /// Background color as `r,g,b` with each channel in [0, 1].
    #[arg(long, env = "SPLATPRUNE_BACKGROUND", default_value = "0,0,0",
          value_parser = parse_background)]
    background: [f32; 3],
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description (JSON); see the README for the schema.
    #[arg(long = "sweep-spec")]
    sweep_spec: PathBuf,
    /// Curve CSV, appended one row per setting as soon as it finishes.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Generator description (JSON); see the README for the schema.
    #[arg(long = "synth-spec")]
    synth_spec: PathBuf,
    /// Output directory for scene.ply, cameras.json, and images/.
    #[arg(long)]
    out: PathBuf,
}

/// Usage/validation problems exit with 2, failures writing results with 3.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Runtime(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_worker_count(threads, || dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Render(args) => cmd_render(args),
        Command::Score(args) => cmd_score(args),
        Command::Prune(args) => cmd_prune(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn parse_background(s: &str) -> Result<[f32; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected `r,g,b`, got `{s}`"));
    }
    let mut rgb = [0.0f32; 3];
    for (slot, part) in rgb.iter_mut().zip(&parts) {
        let v: f32 = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a number"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("channel {v} is outside [0, 1]"));
        }
        *slot = v;
    }
    Ok(rgb)
}

fn render_options(tile_size: u32, background: [f32; 3]) -> RenderOptions<f32> {
    RenderOptions {
        tile_size,
        background: Color::new(background[0], background[1], background[2]),
        ..RenderOptions::default()
    }
}

fn load_scene(path: &Path) -> Result<Scene<f32>, CliError> {
    io::read_ply::<f32>(path).map_err(usage)
}

fn load_cameras(path: &Path) -> Result<Vec<CameraView<f32>>, CliError> {
    io::read_cameras::<f32>(path).map_err(usage)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))
}

/// Records contribution streams view by view, reusing each render for its
/// PNG so `--record` does not pay for a second pass.
fn render_all(
    scene: &Scene<f32>,
    cams: &[CameraView<f32>],
    opts: &RenderOptions<f32>,
    record: bool,
) -> (Vec<Image<f32>>, Vec<ContributionStream<f32>>) {
    let mut pass = opts.clone();
    pass.record_contributions = record;
    let mut images = Vec::with_capacity(cams.len());
    let mut streams = Vec::new();
    for (view_index, cam) in cams.iter().enumerate() {
        let output = render(scene, cam, &pass);
        images.push(output.image);
        if record {
            let mut stream = output.contributions.expect("recording was requested");
            stream.view_index = view_index;
            streams.push(stream);
        }
    }
    (images, streams)
}

#[derive(Serialize)]
struct RenderManifest {
    scene: String,
    primitive_count: usize,
    tile_size: u32,
    background: [f32; 3],
    recorded: bool,
    views: Vec<ManifestView>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct ManifestView {
    name: String,
    image: String,
    width: u32,
    height: u32,
}

fn png_name(view_name: &str) -> String {
    if view_name.ends_with(".png") {
        view_name.to_string()
    } else {
        format!("{view_name}.png")
    }
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let cams = load_cameras(&args.cameras)?;
    let opts = render_options(args.tile_size, args.background);
    create_dir(&args.out)?;

    let start = Instant::now();
    let (images, streams) = render_all(&scene, &cams, &opts, args.record);
    let wall_time_seconds = start.elapsed().as_secs_f64();

    let mut views = Vec::with_capacity(cams.len());
    for (cam, image) in cams.iter().zip(&images) {
        let file = png_name(&cam.name);
        io::write_image(image, args.out.join(&file)).map_err(runtime)?;
        views.push(ManifestView {
            name: cam.name.clone(),
            image: file,
            width: cam.width,
            height: cam.height,
        });
    }
    if args.record {
        io::write_streams(&streams, args.out.join("streams.json")).map_err(runtime)?;
    }

    let manifest = RenderManifest {
        scene: scene.source_tag.clone(),
        primitive_count: scene.len(),
        tile_size: args.tile_size,
        background: args.background,
        recorded: args.record,
        views,
        wall_time_seconds,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    std::fs::write(args.out.join("render_manifest.json"), text + "\n").map_err(runtime)
}

fn parse_function(name: &str) -> Result<ScoreFunctionId, CliError> {
    name.parse().map_err(|_| {
        usage(format!(
            "unknown score function `{name}`; expected lg, ms, rs, eg, or v1..v18"
        ))
    })
}

fn score_options(dist_scale: f64) -> Result<ScoreOptions<f32>, CliError> {
    if !(dist_scale.is_finite() && dist_scale > 0.0) {
        return Err(usage(format!(
            "--dist-scale must be a positive number, got {dist_scale}"
        )));
    }
    Ok(ScoreOptions {
        dist_scale: dist_scale as f32,
    })
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let function = parse_function(&args.function)?;
    let sopts = score_options(args.dist_scale)?;
    if function.needs_ground_truth() && args.images.is_none() {
        return Err(usage(format!(
            "score function {function} compares against ground truth; pass --images"
        )));
    }
    let scene = load_scene(&args.scene)?;
    let mut cams = load_cameras(&args.cameras)?;
    if let Some(dir) = &args.images {
        io::load_ground_truth(&mut cams, dir).map_err(usage)?;
    }

    let opts = RenderOptions::default();
    let streams = record_streams(&scene, &cams, &opts);

    let plan = match args.agg {
        None => function.default_plan(),
        Some(AggChoice::Sum) => ScorePlan::Cross(Aggregation::Sum),
        Some(AggChoice::Max) => ScorePlan::Cross(Aggregation::Max),
        Some(AggChoice::Perray) => ScorePlan::PerRay,
    };
    match plan {
        ScorePlan::Cross(aggregation) => {
            let table =
                aggregate_cross_view(&scene, &streams, &cams, function, aggregation, &sopts)
                    .map_err(usage)?;
            io::write_score_table(&table, &args.out).map_err(runtime)
        }
        ScorePlan::PerRay => {
            let ranked = rank_per_ray(&scene, &streams, &cams, function, &sopts).map_err(usage)?;
            io::write_ranked(&ranked, &args.out).map_err(runtime)
        }
    }
}

/// The integer rank hiding in `--value` for pixelwise_topk.
fn rank_value(value: f64) -> Result<u32, CliError> {
    if value.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&value) {
        return Err(usage(format!(
            "pixelwise_topk needs a whole rank of at least 1, got {value}"
        )));
    }
    Ok(value as u32)
}

fn cmd_prune(args: PruneArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;

    let (retain, spec) = match args.technique {
        TechniqueChoice::CrossRatio | TechniqueChoice::CrossThreshold
        | TechniqueChoice::CrossStochastic => {
            let Some(scores_path) = &args.scores else {
                return Err(usage("cross-view techniques need --scores"));
            };
            let (scores, sidecar) = io::read_score_table::<f32>(scores_path).map_err(usage)?;
            let Some(sidecar) = sidecar else {
                return Err(usage(format!(
                    "{} has no JSON sidecar naming its score function",
                    scores_path.display()
                )));
            };
            let (retain, technique) = match args.technique {
                TechniqueChoice::CrossRatio => (
                    prune_cross_ratio(&scores, args.value).map_err(usage)?,
                    PruneTechnique::CrossRatio(args.value),
                ),
                TechniqueChoice::CrossThreshold => {
                    if !args.value.is_finite() {
                        return Err(usage(format!(
                            "cross_threshold needs a finite threshold, got {}",
                            args.value
                        )));
                    }
                    (
                        prune_cross_threshold(&scores, args.value as f32),
                        PruneTechnique::CrossThreshold(args.value),
                    )
                }
                TechniqueChoice::CrossStochastic => {
                    let Some(seed) = args.seed else {
                        return Err(usage("cross_stochastic needs --seed"));
                    };
                    (
                        prune_cross_stochastic(&scores, args.value, seed).map_err(usage)?,
                        PruneTechnique::CrossStochastic(args.value),
                    )
                }
                TechniqueChoice::PixelwiseTopk => unreachable!(),
            };
            let spec = PruneSpec {
                technique,
                seed: args.seed,
                score_function: sidecar.function,
            };
            (retain, spec)
        }
        TechniqueChoice::PixelwiseTopk => {
            let Some(ranked_path) = &args.ranked else {
                return Err(usage("pixelwise_topk needs --ranked"));
            };
            let n = rank_value(args.value)?;
            let ranked: RankedStreams<f32> = io::read_ranked(ranked_path).map_err(usage)?;
            let retain = prune_pixelwise(&ranked, n).map_err(usage)?;
            let spec = PruneSpec {
                technique: PruneTechnique::PixelwiseTopk(n),
                seed: None,
                score_function: ranked.function,
            };
            (retain, spec)
        }
    };

    let (pruned, _) = apply_mask(&scene, &retain).map_err(usage)?;
    create_dir(&args.out)?;
    io::write_ply(&pruned, args.out.join("pruned.ply")).map_err(runtime)?;
    let mask = PruneMask { retain, spec };
    io::write_mask(&mask, args.out.join("mask.csv")).map_err(runtime)
}

/// PSNR/SSIM/FPS against the installed ground truth. When the reference
/// came from 8-bit PNGs, renders are quantized onto the same lattice first
/// so a scene evaluated against its own exported renders scores exactly at
/// the PSNR cap.
fn evaluate(
    scene: &Scene<f32>,
    cams: &[CameraView<f32>],
    opts: &RenderOptions<f32>,
    fps_repeats: usize,
    label: &str,
    quantize: bool,
) -> Result<MetricsReport, CliError> {
    let mut per_view = Vec::with_capacity(cams.len());
    let mut wall = 0.0f64;
    for cam in cams {
        let gt = cam
            .ground_truth
            .as_ref()
            .ok_or_else(|| usage(format!("camera {} has no ground-truth image", cam.name)))?;
        let start = Instant::now();
        let mut image = render(scene, cam, opts).image;
        wall += start.elapsed().as_secs_f64();
        if quantize {
            for row in 0..image.height() {
                for col in 0..image.width() {
                    let q = io::quantized_color(image.pixel(row, col));
                    image.set_pixel(row, col, q);
                }
            }
        }
        per_view.push(PerViewMetrics {
            name: cam.name.clone(),
            psnr: psnr(&image, gt).map_err(usage)?,
            ssim: ssim(&image, gt).map_err(usage)?,
        });
    }
    let n = per_view.len() as f64;
    Ok(MetricsReport {
        scene: label.to_string(),
        psnr: per_view.iter().map(|v| v.psnr).sum::<f64>() / n,
        ssim: per_view.iter().map(|v| v.ssim).sum::<f64>() / n,
        fps: benchmark_fps(scene, cams, opts, fps_repeats),
        primitive_count: scene.len(),
        render_wall_time: wall,
        per_view,
    })
}

fn report_format(path: &Path) -> io::ReportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => io::ReportFormat::Csv,
        _ => io::ReportFormat::Json,
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let mut cams = load_cameras(&args.cameras)?;
    io::load_ground_truth(&mut cams, &args.gt_images).map_err(usage)?;
    let opts = render_options(args.tile_size, args.background);
    let label = scene.source_tag.clone();
    let report = evaluate(&scene, &cams, &opts, args.fps_repeats as usize, &label, true)?;
    io::write_report(&report, &args.out, report_format(&args.out)).map_err(runtime)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpecFile {
    scene: PathBuf,
    cameras: PathBuf,
    /// Ground-truth PNG directory; omitted, the unpruned scene's own
    /// renders become the reference.
    #[serde(default)]
    images: Option<PathBuf>,
    score_function: ScoreFunctionId,
    #[serde(default)]
    aggregation: Option<Aggregation>,
    technique: SweepTechnique,
    values: Vec<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    dist_scale: Option<f64>,
    /// When present, each setting's pruned scene and mask land here.
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    fps_repeats: Option<usize>,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SweepTechnique {
    CrossRatio,
    CrossThreshold,
    CrossStochastic,
    PixelwiseTopk,
}

fn read_sweep_spec(path: &Path) -> Result<SweepSpecFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn validate_sweep(spec: &SweepSpecFile) -> Result<(), CliError> {
    if spec.values.is_empty() {
        return Err(usage("sweep needs at least one setting value"));
    }
    for &v in &spec.values {
        match spec.technique {
            SweepTechnique::CrossRatio | SweepTechnique::CrossStochastic => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(usage(format!("ratio {v} is outside [0, 1]")));
                }
            }
            SweepTechnique::CrossThreshold => {
                if !v.is_finite() {
                    return Err(usage(format!("threshold {v} is not finite")));
                }
            }
            SweepTechnique::PixelwiseTopk => {
                rank_value(v)?;
            }
        }
    }
    if matches!(spec.technique, SweepTechnique::CrossStochastic) && spec.seed.is_none() {
        return Err(usage("cross_stochastic sweeps need a seed"));
    }
    Ok(())
}

/// File-name fragment for a sweep setting: `0.35` -> `0_35`.
fn setting_slug(v: f64) -> String {
    format!("{v}").replace('.', "_")
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let spec = read_sweep_spec(&args.sweep_spec)?;
    validate_sweep(&spec)?;
    if spec.score_function.needs_ground_truth() && spec.images.is_none() {
        return Err(usage(format!(
            "score function {} compares against ground truth; set \"images\" in the sweep spec",
            spec.score_function
        )));
    }
    let scene = load_scene(&spec.scene)?;
    let mut cams = load_cameras(&spec.cameras)?;
    let quantize = spec.images.is_some();
    if let Some(dir) = &spec.images {
        io::load_ground_truth(&mut cams, dir).map_err(usage)?;
    } else {
        gen_ground_truth(&scene, &mut cams);
    }
    let sopts = score_options(spec.dist_scale.unwrap_or(1.0))?;
    let fps_repeats = spec.fps_repeats.unwrap_or(1).max(1);
    let opts = RenderOptions::default();
    let streams = record_streams(&scene, &cams, &opts);

    // Scores are computed once; only the pruning setting varies.
    enum Basis {
        Table(Vec<f32>),
        Ranked(RankedStreams<f32>),
    }
    let basis = match spec.technique {
        SweepTechnique::PixelwiseTopk => Basis::Ranked(
            rank_per_ray(&scene, &streams, &cams, spec.score_function, &sopts).map_err(usage)?,
        ),
        _ => {
            let aggregation = spec.aggregation.unwrap_or(
                match spec.score_function.default_plan() {
                    ScorePlan::Cross(a) => a,
                    ScorePlan::PerRay => Aggregation::Sum,
                },
            );
            Basis::Table(
                aggregate_cross_view(
                    &scene,
                    &streams,
                    &cams,
                    spec.score_function,
                    aggregation,
                    &sopts,
                )
                .map_err(usage)?
                .per_primitive,
            )
        }
    };

    if let Some(dir) = &spec.output_dir {
        create_dir(dir)?;
    }
    for &value in &spec.values {
        let (retain, technique) = match (&basis, spec.technique) {
            (Basis::Table(scores), SweepTechnique::CrossRatio) => (
                prune_cross_ratio(scores, value).map_err(usage)?,
                PruneTechnique::CrossRatio(value),
            ),
            (Basis::Table(scores), SweepTechnique::CrossThreshold) => (
                prune_cross_threshold(scores, value as f32),
                PruneTechnique::CrossThreshold(value),
            ),
            (Basis::Table(scores), SweepTechnique::CrossStochastic) => (
                prune_cross_stochastic(scores, value, spec.seed.unwrap()).map_err(usage)?,
                PruneTechnique::CrossStochastic(value),
            ),
            (Basis::Ranked(ranked), SweepTechnique::PixelwiseTopk) => {
                let n = rank_value(value)?;
                (
                    prune_pixelwise(ranked, n).map_err(usage)?,
                    PruneTechnique::PixelwiseTopk(n),
                )
            }
            _ => unreachable!("basis always matches the technique"),
        };
        let (pruned, _) = apply_mask(&scene, &retain).map_err(usage)?;
        let retained_count = pruned.len();
        let label = format!("{}@{}", scene.source_tag, value);
        let report = evaluate(&pruned, &cams, &opts, fps_repeats, &label, quantize)?;
        io::append_sweep_row(
            &args.out,
            &io::SweepRow {
                setting: value,
                retained_count,
                psnr: report.psnr,
                ssim: report.ssim,
                fps: report.fps,
            },
        )
        .map_err(runtime)?;

        if let Some(dir) = &spec.output_dir {
            let slug = setting_slug(value);
            io::write_ply(&pruned, dir.join(format!("pruned_{slug}.ply"))).map_err(runtime)?;
            let mask = PruneMask {
                retain,
                spec: PruneSpec {
                    technique,
                    seed: spec.seed,
                    score_function: spec.score_function,
                },
            };
            io::write_mask(&mask, dir.join(format!("mask_{slug}.csv"))).map_err(runtime)?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct GenSpecFile {
    #[serde(flatten)]
    synth: SynthSpec,
    cameras: GenCameras,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenCameras {
    count: usize,
    radius: f64,
    #[serde(default)]
    look_at: [f64; 3],
    resolution: [u32; 2],
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.synth_spec)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.synth_spec.display())))?;
    let spec: GenSpecFile =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.synth_spec.display())))?;
    if spec.cameras.count < 1 {
        return Err(usage("a camera ring needs at least one camera"));
    }
    if !(spec.cameras.radius.is_finite() && spec.cameras.radius > 0.0) {
        return Err(usage(format!(
            "ring radius must be positive, got {}",
            spec.cameras.radius
        )));
    }
    if spec.cameras.resolution.contains(&0) {
        return Err(usage("image resolution must be at least 1x1"));
    }

    let scene = gen_scene::<f32>(&spec.synth).map_err(usage)?;
    let look_at = Vec3::new(
        spec.cameras.look_at[0] as f32,
        spec.cameras.look_at[1] as f32,
        spec.cameras.look_at[2] as f32,
    );
    let mut cams = gen_camera_ring(
        spec.cameras.count,
        spec.cameras.radius,
        look_at,
        (spec.cameras.resolution[0], spec.cameras.resolution[1]),
    );
    gen_ground_truth(&scene, &mut cams);

    create_dir(&args.out)?;
    let images_dir = args.out.join("images");
    create_dir(&images_dir)?;
    io::write_ply(&scene, args.out.join("scene.ply")).map_err(runtime)?;
    io::write_cameras(&cams, args.out.join("cameras.json")).map_err(runtime)?;
    for cam in &cams {
        let gt = cam.ground_truth.as_ref().expect("ground truth installed");
        io::write_image(gt, images_dir.join(&cam.name)).map_err(runtime)?;
    }
    Ok(())
}
