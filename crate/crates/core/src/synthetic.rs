//! Seedable synthetic scenes and camera rigs, so every test and benchmark
//! runs without external data. Generation is a pure function of the spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat3, Vec3};
use crate::model::{CameraView, GaussianPrimitive, Scene, SH_C0};
use crate::rasterizer::{render, RenderOptions};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bounds are empty on axis {axis}: min {min} is not below max {max}")]
    EmptyBounds { axis: usize, min: f64, max: f64 },
    #[error("{name} range [{lo}, {hi}] is inverted")]
    InvertedRange { name: &'static str, lo: f64, hi: f64 },
}

/// Whether generated primitives carry view-dependent color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShMode {
    /// Only the constant band: color is view-independent.
    Band0Only,
    /// All sixteen coefficients randomized.
    FullRandom,
}

/// Axis-aligned world-space box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Recipe for a random scene. Fields omitted from a serialized spec fall
/// back to their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_primitives: usize,
    pub bounds: Bounds,
    /// Log-scale interval, so exp of these are the world-space extents.
    pub scale_range: [f64; 2],
    /// Opacity logit interval.
    pub opacity_range: [f64; 2],
    pub sh_mode: ShMode,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_primitives: 100,
            bounds: Bounds {
                min: [-1.0, -1.0, -1.0],
                max: [1.0, 1.0, 1.0],
            },
            scale_range: [-3.0, -1.5],
            opacity_range: [-2.0, 2.0],
            sh_mode: ShMode::Band0Only,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        for axis in 0..3 {
            if self.bounds.min[axis] >= self.bounds.max[axis] {
                return Err(SynthError::EmptyBounds {
                    axis,
                    min: self.bounds.min[axis],
                    max: self.bounds.max[axis],
                });
            }
        }
        for (name, range) in [("scale", self.scale_range), ("opacity", self.opacity_range)] {
            if range[0] > range[1] {
                return Err(SynthError::InvertedRange {
                    name,
                    lo: range[0],
                    hi: range[1],
                });
            }
        }
        Ok(())
    }
}

/// Generates a random scene, deterministically in the spec. All draws are
/// made in f64 in a fixed per-primitive order, so the result is identical
/// for every scalar type up to conversion.
pub fn gen_scene<T: Scalar>(spec: &SynthSpec) -> Result<Scene<T>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut primitives = Vec::with_capacity(spec.n_primitives);
    for _ in 0..spec.n_primitives {
        let mut p = GaussianPrimitive::<T>::unit();
        p.position = Vec3::new(
            T::of(rng.random_range(spec.bounds.min[0]..=spec.bounds.max[0])),
            T::of(rng.random_range(spec.bounds.min[1]..=spec.bounds.max[1])),
            T::of(rng.random_range(spec.bounds.min[2]..=spec.bounds.max[2])),
        );
        p.log_scale = Vec3::new(
            T::of(rng.random_range(spec.scale_range[0]..=spec.scale_range[1])),
            T::of(rng.random_range(spec.scale_range[0]..=spec.scale_range[1])),
            T::of(rng.random_range(spec.scale_range[0]..=spec.scale_range[1])),
        );
        // Normalized Gaussian 4-vector: uniform on the unit sphere.
        let q = loop {
            let q: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if norm > 1e-6 {
                break [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
            }
        };
        p.rotation = [T::of(q[0]), T::of(q[1]), T::of(q[2]), T::of(q[3])];
        p.opacity_logit = T::of(rng.random_range(spec.opacity_range[0]..=spec.opacity_range[1]));
        // Band 0 spans colors across [0, 1] after the +0.5 shift.
        let band0_extent = 0.5 / SH_C0;
        for c in 0..3 {
            p.sh[0][c] = T::of(rng.random_range(-band0_extent..=band0_extent));
        }
        if spec.sh_mode == ShMode::FullRandom {
            for k in 1..16 {
                for c in 0..3 {
                    p.sh[k][c] = T::of(rng.random_range(-0.25..=0.25));
                }
            }
        }
        primitives.push(p);
    }
    Ok(Scene::new(primitives, format!("synthetic-{}", spec.seed)))
}

/// `k` cameras evenly spaced on a horizontal circle of the given radius,
/// all aimed at `look_at`, with a 60 degree horizontal field of view.
pub fn gen_camera_ring<T: Scalar>(
    k: usize,
    radius: f64,
    look_at: Vec3<T>,
    resolution: (u32, u32),
) -> Vec<CameraView<T>> {
    assert!(k >= 1, "a camera ring needs at least one camera");
    assert!(radius > 0.0, "ring radius must be positive");
    let (width, height) = resolution;
    let focal = T::of(0.5 * width as f64 / (30.0f64.to_radians()).tan());
    (0..k)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            let (sin, cos) = (T::of(theta.sin()), T::of(theta.cos()));
            let offset = Vec3::new(cos * T::of(radius), T::zero(), sin * T::of(radius));
            let position = look_at + offset;
            // Rows are the camera axes in world coordinates: x to the
            // right, y down the image, z the viewing direction.
            let rotation = Mat3 {
                rows: [
                    [sin, T::zero(), -cos],
                    [T::zero(), -T::one(), T::zero()],
                    [-cos, T::zero(), -sin],
                ],
            };
            let translation = -rotation.mul_vec(position);
            CameraView {
                width,
                height,
                fx: focal,
                fy: focal,
                cx: T::of(width as f64 / 2.0),
                cy: T::of(height as f64 / 2.0),
                rotation,
                translation,
                name: format!("view_{j:03}.png"),
                ground_truth: None,
            }
        })
        .collect()
}

/// Renders the scene with default options and installs each image as its
/// camera's ground truth, making color-aware scoring self-consistent.
pub fn gen_ground_truth<T: Scalar>(scene: &Scene<T>, cams: &mut [CameraView<T>]) {
    let opts = RenderOptions::default();
    for cam in cams.iter_mut() {
        let image = render(scene, cam, &opts).image;
        cam.ground_truth = Some(image);
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::metrics::psnr;
    use crate::projection::project_gaussian;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let spec = SynthSpec {
            seed: 42,
            n_primitives: 64,
            sh_mode: ShMode::FullRandom,
            ..SynthSpec::default()
        };
        let a = gen_scene::<f32>(&spec).unwrap();
        let b = gen_scene::<f32>(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_scene::<f32>(&SynthSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_primitives_gives_an_empty_scene() {
        let spec = SynthSpec {
            n_primitives: 0,
            ..SynthSpec::default()
        };
        assert!(gen_scene::<f64>(&spec).unwrap().is_empty());
    }

    #[test]
    fn generated_scenes_satisfy_primitive_invariants() {
        let spec = SynthSpec {
            seed: 7,
            n_primitives: 200,
            sh_mode: ShMode::FullRandom,
            ..SynthSpec::default()
        };
        let scene = gen_scene::<f64>(&spec).unwrap();
        scene.validate().unwrap();
        for p in &scene.primitives {
            assert_relative_eq!(p.rotation_norm(), 1.0, epsilon = 1e-9);
            for axis in [p.position.x, p.position.y, p.position.z] {
                assert!((-1.0..=1.0).contains(&axis));
            }
        }
    }

    #[test]
    fn empty_bounds_are_rejected() {
        let mut spec = SynthSpec::default();
        spec.bounds.min[1] = spec.bounds.max[1];
        assert!(matches!(
            gen_scene::<f64>(&spec),
            Err(SynthError::EmptyBounds { axis: 1, .. })
        ));
    }

    #[test]
    fn band0_colors_are_view_independent() {
        let spec = SynthSpec {
            seed: 5,
            n_primitives: 40,
            ..SynthSpec::default()
        };
        let scene = gen_scene::<f64>(&spec).unwrap();
        let cams = gen_camera_ring(2, 5.0, Vec3::splat(0.0), (32, 32));
        for (id, prim) in scene.primitives.iter().enumerate() {
            let a = project_gaussian(prim, id, &cams[0]);
            let b = project_gaussian(prim, id, &cams[1]);
            if let (Some(a), Some(b)) = (a, b) {
                // The constant band ignores the viewing direction.
                assert_eq!(a.color, b.color, "primitive {id}");
            }
        }
    }

    #[test]
    fn ring_geometry_reference_cases() {
        let look_at = Vec3::new(0.5, -0.25, 2.0);
        let single = gen_camera_ring::<f64>(1, 3.0, look_at, (64, 48));
        assert_eq!(single.len(), 1);
        // Angle zero puts the camera at look_at + (radius, 0, 0).
        let p = single[0].center();
        assert_relative_eq!(p.x, 3.5, epsilon = 1e-12);
        assert_relative_eq!(p.y, -0.25, epsilon = 1e-12);
        assert_relative_eq!(p.z, 2.0, epsilon = 1e-12);

        let ring = gen_camera_ring::<f64>(4, 3.0, look_at, (64, 48));
        for cam in &ring {
            let d = (cam.center() - look_at).norm();
            assert_relative_eq!(d, 3.0, epsilon = 1e-9);
            assert!(cam.rotation.orthonormality_error() < 1e-6);
        }
        // Evenly spaced: consecutive cameras subtend equal chords.
        let chord = |a: &CameraView<f64>, b: &CameraView<f64>| (a.center() - b.center()).norm();
        let c01 = chord(&ring[0], &ring[1]);
        for (i, j) in [(1, 2), (2, 3), (3, 0)] {
            assert_relative_eq!(chord(&ring[i], &ring[j]), c01, epsilon = 1e-9);
        }
    }

    #[test]
    fn cameras_face_the_target() {
        let look_at = Vec3::new(0.0, 0.0, 0.0);
        for cam in gen_camera_ring::<f64>(6, 4.0, look_at, (32, 32)) {
            // look_at should project to the image center with positive depth.
            let in_cam = cam.world_to_camera(look_at);
            assert!(in_cam.z > 0.0);
            assert_relative_eq!(in_cam.x, 0.0, epsilon = 1e-9);
            assert_relative_eq!(in_cam.y, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ground_truth_installation_is_self_consistent() {
        let spec = SynthSpec {
            seed: 12,
            n_primitives: 80,
            ..SynthSpec::default()
        };
        let scene = gen_scene::<f32>(&spec).unwrap();
        let mut cams = gen_camera_ring(2, 4.0, Vec3::splat(0.0), (32, 32));
        gen_ground_truth(&scene, &mut cams);
        let opts = RenderOptions::default();
        for cam in &cams {
            let again = render(&scene, cam, &opts).image;
            let gt = cam.ground_truth.as_ref().unwrap();
            assert_eq!(psnr(&again, gt).unwrap(), 100.0);
        }
    }
}
