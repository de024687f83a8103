//! Image-quality and throughput metrics: PSNR, single-scale SSIM, and a
//! wall-clock render benchmark. Accumulation happens in f64 regardless of
//! the image scalar type.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::model::{CameraView, Scene};
use crate::rasterizer::{render, RenderOptions};
use crate::scalar::Scalar;

/// Reported for exact matches instead of infinity, keeping reports sortable.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Side length of the SSIM window.
const SSIM_WINDOW: u32 = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("images differ in size: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },
    #[error("image {width}x{height} is smaller than the {min}x{min} analysis window")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("view '{view}' has no ground-truth image to evaluate against")]
    MissingGroundTruth { view: String },
    #[error("evaluation needs at least one camera view")]
    NoViews,
}

fn check_dimensions<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<(), MetricsError> {
    if a.same_dimensions(b) {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch {
            a_width: a.width(),
            a_height: a.height(),
            b_width: b.width(),
            b_height: b.height(),
        })
    }
}

/// Peak signal-to-noise ratio in decibels over unit-range images,
/// `10 * log10(1 / MSE)`, capped at 100 dB when the images match exactly.
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64, MetricsError> {
    check_dimensions(a, b)?;
    let mut sum = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x.widen() - y.widen();
        sum += d * d;
    }
    let mse = sum / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn ssim_window_weights() -> [f64; (SSIM_WINDOW * SSIM_WINDOW) as usize] {
    let mut w = [0.0f64; (SSIM_WINDOW * SSIM_WINDOW) as usize];
    let half = (SSIM_WINDOW / 2) as i64;
    let mut sum = 0.0;
    for dy in 0..SSIM_WINDOW as i64 {
        for dx in 0..SSIM_WINDOW as i64 {
            let r2 = ((dx - half) * (dx - half) + (dy - half) * (dy - half)) as f64;
            let v = (-r2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[(dy * SSIM_WINDOW as i64 + dx) as usize] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Single-scale structural similarity with an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.0. Computed per
/// channel over every fully interior window, then meaned.
pub fn ssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64, MetricsError> {
    check_dimensions(a, b)?;
    let (width, height) = (a.width(), a.height());
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(MetricsError::ImageTooSmall {
            width,
            height,
            min: SSIM_WINDOW,
        });
    }
    let weights = ssim_window_weights();
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let da = a.data();
    let db = b.data();
    let mut total = 0.0f64;
    let mut windows = 0u64;
    for channel in 0..3usize {
        for y0 in 0..=(height - SSIM_WINDOW) {
            for x0 in 0..=(width - SSIM_WINDOW) {
                let mut mu_x = 0.0f64;
                let mut mu_y = 0.0f64;
                let mut xx = 0.0f64;
                let mut yy = 0.0f64;
                let mut xy = 0.0f64;
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let w = weights[(dy * SSIM_WINDOW + dx) as usize];
                        let idx = (((y0 + dy) * width + (x0 + dx)) * 3) as usize + channel;
                        let x = da[idx].widen();
                        let y = db[idx].widen();
                        mu_x += w * x;
                        mu_y += w * y;
                        xx += w * x * x;
                        yy += w * y * y;
                        xy += w * x * y;
                    }
                }
                let var_x = xx - mu_x * mu_x;
                let var_y = yy - mu_y * mu_y;
                let cov = xy - mu_x * mu_y;
                let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
                let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
                total += num / den;
                windows += 1;
            }
        }
    }
    Ok(total / windows as f64)
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Frames per second over full passes of `cams`: each repeat renders every
/// view and contributes `frames / seconds`; the median over repeats is
/// returned. One untimed warm-up pass runs first, and contribution
/// recording is forced off while timing.
pub fn benchmark_fps<T: Scalar>(
    scene: &Scene<T>,
    cams: &[CameraView<T>],
    opts: &RenderOptions<T>,
    repeats: usize,
) -> f64 {
    assert!(repeats >= 1, "benchmark needs at least one repeat");
    let mut timing_opts = opts.clone();
    timing_opts.record_contributions = false;
    for cam in cams {
        std::hint::black_box(render(scene, cam, &timing_opts));
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        for cam in cams {
            std::hint::black_box(render(scene, cam, &timing_opts));
        }
        let seconds = start.elapsed().as_secs_f64().max(1e-12);
        samples.push(cams.len() as f64 / seconds);
    }
    median(samples)
}

/// Per-image quality entry of a [`MetricsReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerViewMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Quality and throughput summary of one scene against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scene: String,
    /// Mean over views, dB.
    pub psnr: f64,
    /// Mean over views.
    pub ssim: f64,
    pub fps: f64,
    pub primitive_count: usize,
    /// Total seconds spent rendering the evaluation images.
    pub render_wall_time: f64,
    pub per_view: Vec<PerViewMetrics>,
}

/// Renders every view and compares against its installed ground truth.
/// `fps_repeats` extra timed passes feed the throughput figure.
pub fn evaluate_scene<T: Scalar>(
    scene: &Scene<T>,
    cams: &[CameraView<T>],
    opts: &RenderOptions<T>,
    fps_repeats: usize,
    label: &str,
) -> Result<MetricsReport, MetricsError> {
    if cams.is_empty() {
        return Err(MetricsError::NoViews);
    }
    let mut eval_opts = opts.clone();
    eval_opts.record_contributions = false;
    let mut per_view = Vec::with_capacity(cams.len());
    let mut wall = 0.0f64;
    for cam in cams {
        let gt = cam
            .ground_truth
            .as_ref()
            .ok_or_else(|| MetricsError::MissingGroundTruth {
                view: cam.name.clone(),
            })?;
        let start = Instant::now();
        let out = render(scene, cam, &eval_opts);
        wall += start.elapsed().as_secs_f64();
        per_view.push(PerViewMetrics {
            name: cam.name.clone(),
            psnr: psnr(&out.image, gt)?,
            ssim: ssim(&out.image, gt)?,
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
