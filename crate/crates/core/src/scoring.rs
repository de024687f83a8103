//! Importance scoring over recorded contribution streams: four cross-view
//! baselines (lg, ms, rs, eg) plus the single-factor and combined per-ray
//! kernels v1 through v18, with sum/max aggregation and per-ray ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec2;
use crate::model::{activate_opacity, CameraView, Color, Scene};
use crate::rasterizer::{ContributionRecord, ContributionStream};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("score function {function} requires ground-truth images, but view {view} has none")]
    MissingGroundTruth {
        function: ScoreFunctionId,
        view: usize,
    },
    #[error("stream for view {view} does not match the provided camera list ({cameras} cameras)")]
    ViewOutOfRange { view: usize, cameras: usize },
    #[error("scene has {scene} primitives but the stream references id {id}")]
    PrimitiveOutOfRange { scene: usize, id: usize },
    #[error("gamma_volume needs a non-empty scene")]
    EmptyScene,
}

/// Every importance score the pipeline knows how to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[allow(clippy::upper_case_acronyms)]
pub enum ScoreFunctionId {
    /// Opacity weighted by normalized volume, summed across rays.
    Lg,
    /// Summed compositing weight (alpha * transmittance).
    Ms,
    /// Maximum compositing weight across rays.
    Rs,
    /// Per-ray compositing weight.
    Eg,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
    V10,
    V11,
    V12,
    V13,
    V14,
    V15,
    V16,
    V17,
    V18,
}

pub const ALL_SCORE_FUNCTIONS: [ScoreFunctionId; 22] = [
    ScoreFunctionId::Lg,
    ScoreFunctionId::Ms,
    ScoreFunctionId::Rs,
    ScoreFunctionId::Eg,
    ScoreFunctionId::V1,
    ScoreFunctionId::V2,
    ScoreFunctionId::V3,
    ScoreFunctionId::V4,
    ScoreFunctionId::V5,
    ScoreFunctionId::V6,
    ScoreFunctionId::V7,
    ScoreFunctionId::V8,
    ScoreFunctionId::V9,
    ScoreFunctionId::V10,
    ScoreFunctionId::V11,
    ScoreFunctionId::V12,
    ScoreFunctionId::V13,
    ScoreFunctionId::V14,
    ScoreFunctionId::V15,
    ScoreFunctionId::V16,
    ScoreFunctionId::V17,
    ScoreFunctionId::V18,
];

/// How per-ray scores are reduced into a per-primitive table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Max,
}

/// Default consumption mode of a score function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScorePlan {
    Cross(Aggregation),
    PerRay,
}

impl ScoreFunctionId {
    pub fn default_plan(self) -> ScorePlan {
        match self {
            Self::Lg | Self::Ms => ScorePlan::Cross(Aggregation::Sum),
            Self::Rs => ScorePlan::Cross(Aggregation::Max),
            _ => ScorePlan::PerRay,
        }
    }

    /// Kernels comparing against the ground-truth pixel color.
    pub fn needs_ground_truth(self) -> bool {
        matches!(
            self,
            Self::V8
                | Self::V9
                | Self::V10
                | Self::V11
                | Self::V12
                | Self::V13
                | Self::V14
                | Self::V15
                | Self::V16
                | Self::V17
                | Self::V18
        )
    }

    pub fn needs_gamma(self) -> bool {
        self == Self::Lg
    }
}

impl fmt::Display for ScoreFunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Lg => "lg",
            Self::Ms => "ms",
            Self::Rs => "rs",
            Self::Eg => "eg",
            Self::V1 => "v1",
            Self::V2 => "v2",
            Self::V3 => "v3",
            Self::V4 => "v4",
            Self::V5 => "v5",
            Self::V6 => "v6",
            Self::V7 => "v7",
            Self::V8 => "v8",
            Self::V9 => "v9",
            Self::V10 => "v10",
            Self::V11 => "v11",
            Self::V12 => "v12",
            Self::V13 => "v13",
            Self::V14 => "v14",
            Self::V15 => "v15",
            Self::V16 => "v16",
            Self::V17 => "v17",
            Self::V18 => "v18",
        };
        f.write_str(s)
    }
}

impl FromStr for ScoreFunctionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_SCORE_FUNCTIONS
            .iter()
            .copied()
            .find(|f| f.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown score function '{s}' (expected lg, ms, rs, eg, or v1..v18)"))
    }
}

/// Everything a per-ray kernel can consume about one contribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreContext<T> {
    /// Ground-truth pixel color for the record's ray, when the view has one.
    pub gt_color: Option<Color<T>>,
    /// Ray pixel center in pixel units.
    pub pixel_center: Vec2<T>,
    /// Projected 2D mean of the primitive in this view.
    pub projected_mean: Vec2<T>,
    /// Divisor applied to the pixel distance before the exponential.
    pub dist_scale: T,
    /// Normalized-volume factor (lg only; 1 otherwise).
    pub gamma: T,
    /// Activated opacity of the primitive.
    pub sigma: T,
    /// Transmittance drop caused by this record, `alpha * T`.
    pub delta_t: T,
}

/// Per-primitive score table aligned with scene ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable<T> {
    pub per_primitive: Vec<T>,
    pub aggregation: Aggregation,
    pub function: ScoreFunctionId,
    pub views_used: usize,
}

/// Knobs shared by all scoring drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreOptions<T> {
    /// `dist_scale` (lambda) for distance-based kernels.
    pub dist_scale: T,
}

impl<T: Scalar> Default for ScoreOptions<T> {
    fn default() -> Self {
        Self {
            dist_scale: T::one(),
        }
    }
}

/// Normalized-volume factor per primitive: the product of the exponentiated
/// scales, divided by its 90th-percentile (nearest-rank) over the scene,
/// clamped to [0, 1], raised to the 0.1 power.
pub fn gamma_volume<T: Scalar>(scene: &Scene<T>) -> Result<Vec<T>, ScoreError> {
    if scene.is_empty() {
        return Err(ScoreError::EmptyScene);
    }
    let volumes: Vec<T> = scene
        .primitives
        .iter()
        .map(|p| p.log_scale.x.exp() * p.log_scale.y.exp() * p.log_scale.z.exp())
        .collect();
    let mut sorted = volumes.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite volumes"));
    let rank = (0.9 * scene.len() as f64).ceil() as usize;
    let p90 = sorted[rank.max(1) - 1];
    let exponent = T::of(0.1);
    Ok(volumes
        .into_iter()
        .map(|v| {
            let ratio = if p90 > T::zero() { v / p90 } else { T::one() };
            ratio.max(T::zero()).min(T::one()).powf(exponent)
        })
        .collect())
}

fn mean_l1<T: Scalar>(gt: Color<T>, c: Color<T>) -> T {
    let c = c.clamp01();
    ((gt.r - c.r).abs() + (gt.g - c.g).abs() + (gt.b - c.b).abs()) / T::of(3.0)
}

fn cosine_similarity<T: Scalar>(gt: Color<T>, c: Color<T>) -> T {
    let c = c.clamp01();
    let dot = gt.r * c.r + gt.g * c.g + gt.b * c.b;
    let na = (gt.r * gt.r + gt.g * gt.g + gt.b * gt.b).sqrt();
    let nb = (c.r * c.r + c.g * c.g + c.b * c.b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    // Both vectors are component-wise non-negative, so the true cosine lies
    // in [0, 1]; the clamp only strips rounding overshoot.
    (dot / (na * nb)).max(T::zero()).min(T::one())
}

/// Evaluates one score kernel on one contribution record.
pub fn per_ray_score<T: Scalar>(
    function: ScoreFunctionId,
    rec: &ContributionRecord<T>,
    ctx: &ScoreContext<T>,
) -> Result<T, ScoreError> {
    use ScoreFunctionId::*;

    let alpha = rec.alpha;
    let trans = rec.transmittance_before;
    let weight = alpha * trans;

    let gt = || -> Result<Color<T>, ScoreError> {
        ctx.gt_color.ok_or(ScoreError::MissingGroundTruth {
            function,
            view: usize::MAX,
        })
    };
    let dist_kernel = || {
        let d = (ctx.pixel_center - ctx.projected_mean).norm() / ctx.dist_scale;
        (-d).exp()
    };
    let color_kernel = |gt: Color<T>| T::one() - mean_l1(gt, rec.color);

    Ok(match function {
        Lg => ctx.sigma * ctx.gamma,
        Ms | Rs | Eg => weight,
        V1 => ctx.sigma,
        V2 => alpha,
        V3 => ctx.delta_t,
        V4 => dist_kernel(),
        V5 => dist_kernel() * alpha,
        V6 => dist_kernel() * weight,
        V7 => dist_kernel() * alpha * ctx.delta_t,
        V8 => cosine_similarity(gt()?, rec.color),
        V9 => color_kernel(gt()?),
        V10 => (-mean_l1(gt()?, rec.color)).exp(),
        V11 => (-mean_l1(gt()?, rec.color)).exp() * alpha,
        V12 => color_kernel(gt()?) * alpha,
        V13 => color_kernel(gt()?) * weight,
        V14 => color_kernel(gt()?) * ctx.delta_t,
        V15 => color_kernel(gt()?) * dist_kernel(),
        V16 => color_kernel(gt()?) * dist_kernel() * alpha,
        V17 => color_kernel(gt()?) * dist_kernel() * weight,
        V18 => color_kernel(gt()?) * dist_kernel() * ctx.delta_t,
    })
}

struct StreamTables<T> {
    sigma: Vec<T>,
    gamma: Vec<T>,
}

fn prepare_tables<T: Scalar>(
    scene: &Scene<T>,
    function: ScoreFunctionId,
) -> Result<StreamTables<T>, ScoreError> {
    let sigma = scene
        .primitives
        .iter()
        .map(|p| activate_opacity(p.opacity_logit))
        .collect();
    let gamma = if function.needs_gamma() {
        gamma_volume(scene)?
    } else {
        vec![T::one(); scene.len()]
    };
    Ok(StreamTables { sigma, gamma })
}

fn check_views<T: Scalar>(
    function: ScoreFunctionId,
    streams: &[ContributionStream<T>],
    views: &[CameraView<T>],
) -> Result<(), ScoreError> {
    for stream in streams {
        if stream.view_index >= views.len() {
            return Err(ScoreError::ViewOutOfRange {
                view: stream.view_index,
                cameras: views.len(),
            });
        }
        if function.needs_ground_truth() && views[stream.view_index].ground_truth.is_none() {
            return Err(ScoreError::MissingGroundTruth {
                function,
                view: stream.view_index,
            });
        }
    }
    Ok(())
}

fn context_for_record<T: Scalar>(
    rec: &ContributionRecord<T>,
    row: u32,
    col: u32,
    stream: &ContributionStream<T>,
    view: &CameraView<T>,
    tables: &StreamTables<T>,
    opts: &ScoreOptions<T>,
) -> Result<ScoreContext<T>, ScoreError> {
    let id = rec.primitive_id;
    if id >= tables.sigma.len() {
        return Err(ScoreError::PrimitiveOutOfRange {
            scene: tables.sigma.len(),
            id,
        });
    }
    let half = T::of(0.5);
    Ok(ScoreContext {
        gt_color: view.ground_truth.as_ref().map(|img| img.pixel(row, col)),
        pixel_center: Vec2::new(T::of(col as f64) + half, T::of(row as f64) + half),
        projected_mean: stream.mean2d[id].expect("recorded primitives were projected"),
        dist_scale: opts.dist_scale,
        gamma: tables.gamma[id],
        sigma: tables.sigma[id],
        delta_t: rec.weight,
    })
}

/// Reduces per-ray scores into one score per primitive across all views.
/// Sums run in canonical stream order, so tables are identical for any
/// worker count. Primitives never recorded keep score 0.
pub fn aggregate_cross_view<T: Scalar>(
    scene: &Scene<T>,
    streams: &[ContributionStream<T>],
    views: &[CameraView<T>],
    function: ScoreFunctionId,
    aggregation: Aggregation,
    opts: &ScoreOptions<T>,
) -> Result<ScoreTable<T>, ScoreError> {
    check_views(function, streams, views)?;
    let tables = prepare_tables(scene, function)?;
    let mut per_primitive = vec![T::zero(); scene.len()];
    for stream in streams {
        let view = &views[stream.view_index];
        for ray in &stream.rays {
            for rec in &ray.records {
                let ctx = context_for_record(rec, ray.row, ray.col, stream, view, &tables, opts)?;
                let s = per_ray_score(function, rec, &ctx)?;
                let slot = &mut per_primitive[rec.primitive_id];
                match aggregation {
                    Aggregation::Sum => *slot += s,
                    Aggregation::Max => *slot = (*slot).max(s),
                }
            }
        }
    }
    Ok(ScoreTable {
        per_primitive,
        aggregation,
        function,
        views_used: streams.len(),
    })
}

/// One scored entry of a ray's ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry<T> {
    pub primitive_id: usize,
    pub score: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRay<T> {
    pub row: u32,
    pub col: u32,
    /// Entries sorted by score descending; ties by ascending primitive id,
    /// then front-to-back position.
    pub entries: Vec<RankedEntry<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedView<T> {
    pub view_index: usize,
    pub rays: Vec<RankedRay<T>>,
}

/// Per-ray rankings across all views, ready for pixel-wise pruning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedStreams<T> {
    pub function: ScoreFunctionId,
    pub n_primitives: usize,
    pub views: Vec<RankedView<T>>,
}

/// Scores and sorts every ray's contributions.
pub fn rank_per_ray<T: Scalar>(
    scene: &Scene<T>,
    streams: &[ContributionStream<T>],
    views: &[CameraView<T>],
    function: ScoreFunctionId,
    opts: &ScoreOptions<T>,
) -> Result<RankedStreams<T>, ScoreError> {
    check_views(function, streams, views)?;
    let tables = prepare_tables(scene, function)?;
    let mut out = Vec::with_capacity(streams.len());
    for stream in streams {
        let view = &views[stream.view_index];
        let mut rays = Vec::with_capacity(stream.rays.len());
        for ray in &stream.rays {
            let mut entries = Vec::with_capacity(ray.records.len());
            for rec in &ray.records {
                let ctx = context_for_record(rec, ray.row, ray.col, stream, view, &tables, opts)?;
                entries.push(RankedEntry {
                    primitive_id: rec.primitive_id,
                    score: per_ray_score(function, rec, &ctx)?,
                });
            }
            // Stable sort: equal (score, id) pairs keep front-to-back order.
            entries.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .expect("finite scores")
                    .then(a.primitive_id.cmp(&b.primitive_id))
            });
            rays.push(RankedRay {
                row: ray.row,
                col: ray.col,
                entries,
            });
        }
        out.push(RankedView {
            view_index: stream.view_index,
            rays,
        });
    }
    Ok(RankedStreams {
        function,
        n_primitives: scene.len(),
        views: out,
    })
}
