//! Tile-based forward rasterizer. Primitives are binned into square screen
//! tiles, sorted front-to-back, and alpha-composited per pixel. A brute-force
//! per-pixel oracle with the identical contract backs the test suite.
//!
//! Parallelism is over tiles only; per-tile outputs are stitched back in
//! canonical tile-row-major order, so renders and recorded contribution
//! streams are bit-identical for any worker count.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::math::Vec2;
use crate::model::{CameraView, Color, Scene};
use crate::projection::{evaluate_2d_gaussian, project_scene, Projected2DGaussian};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions<T> {
    /// Contributions with alpha below this are skipped entirely.
    pub alpha_threshold: T,
    /// Upper clamp on per-primitive alpha.
    pub alpha_cap: T,
    /// A ray terminates once its transmittance drops below this.
    pub transmittance_floor: T,
    pub background: Color<T>,
    /// Record per-ray contributions for scoring. Never changes the image.
    pub record_contributions: bool,
    pub tile_size: u32,
}

impl<T: Scalar> Default for RenderOptions<T> {
    fn default() -> Self {
        Self {
            alpha_threshold: T::one() / T::of(255.0),
            alpha_cap: T::of(0.99),
            transmittance_floor: T::of(1e-4),
            background: Color::black(),
            record_contributions: false,
            tile_size: 16,
        }
    }
}

/// One composited contribution of a primitive to a ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionRecord<T> {
    pub primitive_id: usize,
    pub alpha: T,
    /// Transmittance the ray carried into this contribution.
    pub transmittance_before: T,
    /// `alpha * transmittance_before`.
    pub weight: T,
    /// The primitive's view-dependent color on this ray.
    pub color: Color<T>,
}

/// All contributions a single ray (pixel) received, front to back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayContributions<T> {
    pub row: u32,
    pub col: u32,
    pub records: Vec<ContributionRecord<T>>,
}

/// Recorded contributions of one rendered view; the substrate every score
/// function consumes. Rays with no contributions are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionStream<T> {
    pub view_index: usize,
    pub width: u32,
    pub height: u32,
    /// Hit rays in canonical order: tile-row-major, row-major within a tile.
    pub rays: Vec<RayContributions<T>>,
    /// Projected screen mean per primitive id; `None` when culled this view.
    pub mean2d: Vec<Option<Vec2<T>>>,
}

impl<T: Scalar> ContributionStream<T> {
    pub fn record_count(&self) -> usize {
        self.rays.iter().map(|r| r.records.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput<T> {
    pub image: Image<T>,
    pub contributions: Option<ContributionStream<T>>,
    /// Composited contributions per pixel, row-major.
    pub per_ray_hit_count: Vec<u32>,
}

/// Primitive indices binned per tile, each list sorted front to back.
#[derive(Clone, Debug)]
pub struct TileAssignment {
    pub tile_size: u32,
    pub tiles_x: u32,
    pub tiles_y: u32,
    /// Indices into the projected slice, sorted by `(depth, primitive_id)`.
    pub per_tile: Vec<Vec<usize>>,
}

fn depth_id_order<T: Scalar>(a: (T, usize), b: (T, usize)) -> Ordering {
    a.0
        .partial_cmp(&b.0)
        .expect("projected depths are finite")
        .then(a.1.cmp(&b.1))
}

/// Inclusive tile index range covered by a screen rectangle, or `None` when
/// it misses the grid.
fn tile_range<T: Scalar>(lo: T, hi: T, tile_size: u32, tiles: u32) -> Option<(u32, u32)> {
    let ts = T::of(tile_size as f64);
    let first = (lo / ts).floor().widen() as i64;
    let last = (hi / ts).floor().widen() as i64;
    if last < 0 || first >= tiles as i64 {
        return None;
    }
    Some((first.max(0) as u32, last.min(tiles as i64 - 1) as u32))
}

/// Bins projected primitives into tiles by their three-sigma rectangles.
pub fn assign_tiles<T: Scalar>(
    projected: &[Projected2DGaussian<T>],
    width: u32,
    height: u32,
    tile_size: u32,
) -> TileAssignment {
    assert!(tile_size > 0, "tile size must be positive");
    let tiles_x = width.div_ceil(tile_size);
    let tiles_y = height.div_ceil(tile_size);
    let mut per_tile = vec![Vec::new(); tiles_x as usize * tiles_y as usize];
    for (idx, g) in projected.iter().enumerate() {
        let (lo, hi) = g.extent_rect();
        let Some((tx0, tx1)) = tile_range(lo.x, hi.x, tile_size, tiles_x) else {
            continue;
        };
        let Some((ty0, ty1)) = tile_range(lo.y, hi.y, tile_size, tiles_y) else {
            continue;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                per_tile[(ty * tiles_x + tx) as usize].push(idx);
            }
        }
    }
    for list in per_tile.iter_mut() {
        list.sort_unstable_by(|&a, &b| {
            depth_id_order(
                (projected[a].depth, projected[a].primitive_id),
                (projected[b].depth, projected[b].primitive_id),
            )
        });
    }
    TileAssignment {
        tile_size,
        tiles_x,
        tiles_y,
        per_tile,
    }
}

struct TileResult<T> {
    /// `(row, col, color, hits)` for every pixel in the tile, row-major.
    pixels: Vec<(u32, u32, Color<T>, u32)>,
    rays: Vec<RayContributions<T>>,
}

fn render_tile<T: Scalar>(
    projected: &[Projected2DGaussian<T>],
    order: &[usize],
    rows: std::ops::Range<u32>,
    cols: std::ops::Range<u32>,
    opts: &RenderOptions<T>,
) -> TileResult<T> {
    let mut pixels = Vec::with_capacity(rows.len() * cols.len());
    let mut rays = Vec::new();
    let half = T::of(0.5);
    for row in rows {
        for col in cols.clone() {
            let center = Vec2::new(T::of(col as f64) + half, T::of(row as f64) + half);
            let mut transmittance = T::one();
            let mut color = Color::black();
            let mut hits = 0u32;
            let mut records = Vec::new();
            for &idx in order {
                let g = &projected[idx];
                let alpha = (g.sigma * evaluate_2d_gaussian(g, center)).min(opts.alpha_cap);
                if alpha < opts.alpha_threshold {
                    continue;
                }
                let weight = alpha * transmittance;
                color = color + g.color.scale(weight);
                hits += 1;
                if opts.record_contributions {
                    records.push(ContributionRecord {
                        primitive_id: g.primitive_id,
                        alpha,
                        transmittance_before: transmittance,
                        weight,
                        color: g.color,
                    });
                }
                transmittance *= T::one() - alpha;
                if transmittance < opts.transmittance_floor {
                    break;
                }
            }
            color = color + opts.background.scale(transmittance);
            pixels.push((row, col, color.clamp01(), hits));
            if !records.is_empty() {
                rays.push(RayContributions { row, col, records });
            }
        }
    }
    TileResult { pixels, rays }
}

/// Renders a view through the tile pipeline.
pub fn render<T: Scalar>(
    scene: &Scene<T>,
    cam: &CameraView<T>,
    opts: &RenderOptions<T>,
) -> RenderOutput<T> {
    let projected = project_scene(scene, cam);
    let tiles = assign_tiles(&projected, cam.width, cam.height, opts.tile_size);

    let tile_results: Vec<TileResult<T>> = (0..tiles.per_tile.len())
        .into_par_iter()
        .map(|ti| {
            let tx = ti as u32 % tiles.tiles_x;
            let ty = ti as u32 / tiles.tiles_x;
            let rows = ty * opts.tile_size..((ty + 1) * opts.tile_size).min(cam.height);
            let cols = tx * opts.tile_size..((tx + 1) * opts.tile_size).min(cam.width);
            render_tile(&projected, &tiles.per_tile[ti], rows, cols, opts)
        })
        .collect();

    let mut image = Image::new(cam.width, cam.height);
    let mut per_ray_hit_count = vec![0u32; cam.pixel_count()];
    let mut rays = Vec::new();
    for tile in tile_results {
        for (row, col, color, hits) in tile.pixels {
            image.set_pixel(row, col, color);
            per_ray_hit_count[row as usize * cam.width as usize + col as usize] = hits;
        }
        rays.extend(tile.rays);
    }

    let contributions = opts.record_contributions.then(|| {
        let mut mean2d = vec![None; scene.len()];
        for g in &projected {
            mean2d[g.primitive_id] = Some(g.mean2d);
        }
        ContributionStream {
            view_index: 0,
            width: cam.width,
            height: cam.height,
            rays,
            mean2d,
        }
    });

    RenderOutput {
        image,
        contributions,
        per_ray_hit_count,
    }
}

/// Reference renderer: per pixel, walks every projected primitive in global
/// `(depth, id)` order with the same footprint gate the tile pipeline uses.
/// No binning, no parallelism; exists to cross-check `render`.
pub fn render_oracle<T: Scalar>(
    scene: &Scene<T>,
    cam: &CameraView<T>,
    opts: &RenderOptions<T>,
) -> RenderOutput<T> {
    let projected = project_scene(scene, cam);
    let mut order: Vec<usize> = (0..projected.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        depth_id_order(
            (projected[a].depth, projected[a].primitive_id),
            (projected[b].depth, projected[b].primitive_id),
        )
    });

    let tiles_x = cam.width.div_ceil(opts.tile_size);
    let tiles_y = cam.height.div_ceil(opts.tile_size);
    // Tile coverage per primitive, from the same three-sigma rectangles.
    let coverage: Vec<Option<(u32, u32, u32, u32)>> = projected
        .iter()
        .map(|g| {
            let (lo, hi) = g.extent_rect();
            let xs = tile_range(lo.x, hi.x, opts.tile_size, tiles_x)?;
            let ys = tile_range(lo.y, hi.y, opts.tile_size, tiles_y)?;
            Some((xs.0, xs.1, ys.0, ys.1))
        })
        .collect();

    let mut image = Image::new(cam.width, cam.height);
    let mut per_ray_hit_count = vec![0u32; cam.pixel_count()];
    let mut rays = Vec::new();
    let half = T::of(0.5);

    // Walk pixels in the same canonical order the tile pipeline emits.
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let row_range = ty * opts.tile_size..((ty + 1) * opts.tile_size).min(cam.height);
            for row in row_range {
                let col_range = tx * opts.tile_size..((tx + 1) * opts.tile_size).min(cam.width);
                for col in col_range {
                    let center = Vec2::new(T::of(col as f64) + half, T::of(row as f64) + half);
                    let mut transmittance = T::one();
                    let mut color = Color::black();
                    let mut hits = 0u32;
                    let mut records = Vec::new();
                    for &idx in &order {
                        let Some((tx0, tx1, ty0, ty1)) = coverage[idx] else {
                            continue;
                        };
                        if tx < tx0 || tx > tx1 || ty < ty0 || ty > ty1 {
                            continue;
                        }
                        let g = &projected[idx];
                        let alpha =
                            (g.sigma * evaluate_2d_gaussian(g, center)).min(opts.alpha_cap);
                        if alpha < opts.alpha_threshold {
                            continue;
                        }
                        let weight = alpha * transmittance;
                        color = color + g.color.scale(weight);
                        hits += 1;
                        if opts.record_contributions {
                            records.push(ContributionRecord {
                                primitive_id: g.primitive_id,
                                alpha,
                                transmittance_before: transmittance,
                                weight,
                                color: g.color,
                            });
                        }
                        transmittance *= T::one() - alpha;
                        if transmittance < opts.transmittance_floor {
                            break;
                        }
                    }
                    color = color + opts.background.scale(transmittance);
                    image.set_pixel(row, col, color.clamp01());
                    per_ray_hit_count[row as usize * cam.width as usize + col as usize] = hits;
                    if !records.is_empty() {
                        rays.push(RayContributions { row, col, records });
                    }
                }
            }
        }
    }

    let contributions = opts.record_contributions.then(|| {
        let mut mean2d = vec![None; scene.len()];
        for g in &projected {
            mean2d[g.primitive_id] = Some(g.mean2d);
        }
        ContributionStream {
            view_index: 0,
            width: cam.width,
            height: cam.height,
            rays,
            mean2d,
        }
    });

    RenderOutput {
        image,
        contributions,
        per_ray_hit_count,
    }
}

/// Renders every view with recording enabled and returns the streams, tagged
/// with their view indices.
pub fn record_streams<T: Scalar>(
    scene: &Scene<T>,
    cams: &[CameraView<T>],
    opts: &RenderOptions<T>,
) -> Vec<ContributionStream<T>> {
    let mut recording = opts.clone();
    recording.record_contributions = true;
    cams.iter()
        .enumerate()
        .map(|(i, cam)| {
            let mut stream = render(scene, cam, &recording)
                .contributions
                .expect("recording was enabled");
            stream.view_index = i;
            stream
        })
        .collect()
}
