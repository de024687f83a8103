//! Projection of 3D Gaussians into screen space: EWA-style first-order
//! linearization of the perspective map, plus the low-pass dilation that
//! keeps every footprint at least a fraction of a pixel wide.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Mat2x3, SymMat2, Vec2, Vec3};
use crate::model::{activate_opacity, build_covariance_3d, evaluate_sh, CameraView, Color, GaussianPrimitive, Scene};
use crate::scalar::Scalar;

/// Camera-space z at or below which a primitive is culled.
pub const NEAR_PLANE: f64 = 0.01;

/// Isotropic variance added to every projected covariance (low-pass filter).
pub const COVARIANCE_DILATION: f64 = 0.3;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("point at camera-space depth {depth} is behind the near plane {near}")]
    BehindCamera { depth: f64, near: f64 },
}

/// A primitive after projection: everything the rasterizer needs, nothing it
/// does not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projected2DGaussian<T> {
    pub primitive_id: usize,
    /// Projected mean in continuous pixel coordinates.
    pub mean2d: Vec2<T>,
    /// Screen-space covariance, dilation included.
    pub cov2d: SymMat2<T>,
    /// Camera-space depth used for compositing order.
    pub depth: T,
    /// View-dependent color, clamped at zero.
    pub color: Color<T>,
    /// Activated opacity.
    pub sigma: T,
}

impl<T: Scalar> Projected2DGaussian<T> {
    /// Half-width of the square screen bound: three standard deviations
    /// along the covariance's major axis.
    pub fn extent_radius(&self) -> T {
        T::of(3.0) * self.cov2d.max_eigenvalue().max(T::zero()).sqrt()
    }

    /// Axis-aligned screen rectangle `(min, max)` covering the footprint.
    pub fn extent_rect(&self) -> (Vec2<T>, Vec2<T>) {
        let r = self.extent_radius();
        (
            Vec2::new(self.mean2d.x - r, self.mean2d.y - r),
            Vec2::new(self.mean2d.x + r, self.mean2d.y + r),
        )
    }
}

/// Jacobian of the pinhole projection at a camera-space point.
pub fn perspective_jacobian<T: Scalar>(
    p_cam: Vec3<T>,
    fx: T,
    fy: T,
) -> Result<Mat2x3<T>, ProjectionError> {
    let near = T::of(NEAR_PLANE);
    if p_cam.z <= near {
        return Err(ProjectionError::BehindCamera {
            depth: p_cam.z.widen(),
            near: NEAR_PLANE,
        });
    }
    let z_inv = T::one() / p_cam.z;
    let z_inv2 = z_inv * z_inv;
    Ok(Mat2x3::from_rows([
        [fx * z_inv, T::zero(), -fx * p_cam.x * z_inv2],
        [T::zero(), fy * z_inv, -fy * p_cam.y * z_inv2],
    ]))
}

/// Projects one primitive through a camera. Returns `None` when the
/// primitive is culled: behind the near plane, degenerate, or with a screen
/// footprint that misses the image entirely.
pub fn project_gaussian<T: Scalar>(
    prim: &GaussianPrimitive<T>,
    primitive_id: usize,
    cam: &CameraView<T>,
) -> Option<Projected2DGaussian<T>> {
    let p_cam = cam.world_to_camera(prim.position);
    // Culls NaN depths along with everything at or behind the near plane.
    if p_cam.z.is_nan() || p_cam.z <= T::of(NEAR_PLANE) {
        return None;
    }
    let cov3d = build_covariance_3d(prim).ok()?;
    let jac = perspective_jacobian(p_cam, cam.fx, cam.fy).expect("depth checked above");

    let mean2d = Vec2::new(
        cam.fx * p_cam.x / p_cam.z + cam.cx,
        cam.fy * p_cam.y / p_cam.z + cam.cy,
    );

    // Rotate the covariance into camera space, then flatten through J.
    let cov_cam = cam.rotation.mul_mat(&cov3d).mul_mat(&cam.rotation.transpose());
    let mut cov2d = jac.sandwich(&cov_cam);
    cov2d.a += T::of(COVARIANCE_DILATION);
    cov2d.c += T::of(COVARIANCE_DILATION);

    let dir = (prim.position - cam.center()).normalized();
    let projected = Projected2DGaussian {
        primitive_id,
        mean2d,
        cov2d,
        depth: p_cam.z,
        color: evaluate_sh(&prim.sh, dir),
        sigma: activate_opacity(prim.opacity_logit),
    };

    // Cull when the three-sigma rectangle misses the image.
    let (lo, hi) = projected.extent_rect();
    let (w, h) = (T::of(cam.width as f64), T::of(cam.height as f64));
    if hi.x <= T::zero() || hi.y <= T::zero() || lo.x >= w || lo.y >= h {
        return None;
    }
    Some(projected)
}

/// Projects a whole scene, dropping culled primitives but preserving id
/// order. Parallel over primitives; output order is id-deterministic.
pub fn project_scene<T: Scalar>(scene: &Scene<T>, cam: &CameraView<T>) -> Vec<Projected2DGaussian<T>> {
    scene
        .primitives
        .par_iter()
        .enumerate()
        .filter_map(|(id, prim)| project_gaussian(prim, id, cam))
        .collect()
}

/// Unnormalized Gaussian falloff at a screen point: `exp(-0.5 d^T C^-1 d)`,
/// exactly 1 at the mean. The quadratic form is clamped at zero so round-off
/// can never push the value above 1.
pub fn evaluate_2d_gaussian<T: Scalar>(g: &Projected2DGaussian<T>, point: Vec2<T>) -> T {
    let d = point - g.mean2d;
    let q = g.cov2d.inverse().quad_form(d).max(T::zero());
    (-T::of(0.5) * q).exp()
}
