//! Core library: scene model, projection, tile rasterizer, contribution
//! scoring, pruning, metrics, and file formats for 3D Gaussian splat scenes.

pub mod image;
pub mod io;
pub mod math;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod pruning;
pub mod rasterizer;
pub mod scalar;
pub mod scoring;
pub mod synthetic;

pub use scalar::{lit, Scalar};

/// Runs `f` on a dedicated thread pool with `workers` threads; `0` means the
/// ambient (global) pool. Outputs are bit-identical for any worker count.
pub fn with_worker_count<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool")
        .install(f)
}

/// Concrete aliases for the two supported scalar types.
pub type Primitive32 = model::GaussianPrimitive<f32>;
pub type Primitive64 = model::GaussianPrimitive<f64>;
pub type Scene32 = model::Scene<f32>;
pub type Scene64 = model::Scene<f64>;
pub type Camera32 = model::CameraView<f32>;
pub type Camera64 = model::CameraView<f64>;
pub type Color32 = model::Color<f32>;
pub type Color64 = model::Color<f64>;
pub type Image32 = image::Image<f32>;
pub type Image64 = image::Image<f64>;
pub type RenderOptions32 = rasterizer::RenderOptions<f32>;
pub type RenderOptions64 = rasterizer::RenderOptions<f64>;
pub type ScoreTable32 = scoring::ScoreTable<f32>;
pub type ScoreTable64 = scoring::ScoreTable<f64>;
pub type RankedStreams32 = scoring::RankedStreams<f32>;
pub type RankedStreams64 = scoring::RankedStreams<f64>;
pub type ContributionStream32 = rasterizer::ContributionStream<f32>;
pub type ContributionStream64 = rasterizer::ContributionStream<f64>;
