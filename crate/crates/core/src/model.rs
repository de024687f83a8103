//! Scene model: anisotropic 3D Gaussian primitives with spherical-harmonic
//! color, plus the pinhole cameras they are rendered through.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::math::{quaternion_to_rotation, Mat3, Vec3};
use crate::scalar::Scalar;

/// Number of spherical-harmonic coefficients per color channel (degree 3).
pub const SH_COEFF_COUNT: usize = 16;

pub const SH_C0: f64 = 0.28209479177387814;
const SH_C1: f64 = 0.4886025119029199;
const SH_C2: [f64; 5] = [
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
];
const SH_C3: [f64; 7] = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("primitive {index} has a degenerate rotation (norm {norm} below 1e-12)")]
    DegenerateRotation { index: usize, norm: f64 },
    #[error("primitive {index} has a non-finite {field}")]
    NonFinite { index: usize, field: &'static str },
}

/// Linear RGB color. Channels are non-negative after SH evaluation but may
/// exceed 1 until a pixel is finalized.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Color<T> {
    pub r: T,
    pub g: T,
    pub b: T,
}

impl<T: Scalar> Color<T> {
    pub fn new(r: T, g: T, b: T) -> Self {
        Self { r, g, b }
    }

    pub fn splat(v: T) -> Self {
        Self { r: v, g: v, b: v }
    }

    pub fn black() -> Self {
        Self::splat(T::zero())
    }

    pub fn clamp01(self) -> Self {
        let clamp = |v: T| v.max(T::zero()).min(T::one());
        Self::new(clamp(self.r), clamp(self.g), clamp(self.b))
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.r * s, self.g * s, self.b * s)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.r, self.g, self.b]
    }
}

impl<T: Scalar> std::ops::Add for Color<T> {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

/// One splat: 59 parameters (3 position + 3 log-scale + 4 rotation +
/// 1 opacity logit + 48 SH coefficients).
///
/// Storage conventions match common splat checkpoints: scales are stored as
/// logarithms, opacity as a logit, and the rotation as an unnormalized
/// `(w, x, y, z)` quaternion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrimitive<T> {
    pub position: Vec3<T>,
    pub log_scale: Vec3<T>,
    pub rotation: [T; 4],
    pub opacity_logit: T,
    /// `sh[k][c]`: coefficient `k` of channel `c` (0 = R, 1 = G, 2 = B).
    pub sh: [[T; 3]; SH_COEFF_COUNT],
}

impl<T: Scalar> GaussianPrimitive<T> {
    pub const PARAM_COUNT: usize = 3 + 3 + 4 + 1 + 3 * SH_COEFF_COUNT;

    /// Axis-aligned unit primitive at the origin; a convenient test base.
    pub fn unit() -> Self {
        Self {
            position: Vec3::splat(T::zero()),
            log_scale: Vec3::splat(T::zero()),
            rotation: [T::one(), T::zero(), T::zero(), T::zero()],
            opacity_logit: T::zero(),
            sh: [[T::zero(); 3]; SH_COEFF_COUNT],
        }
    }

    pub fn rotation_norm(&self) -> T {
        let q = &self.rotation;
        (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
    }

    pub fn validate(&self, index: usize) -> Result<(), ModelError> {
        let fields: [(&'static str, &dyn Fn() -> bool); 5] = [
            ("position", &|| {
                self.position.to_array().iter().all(|v| v.is_finite())
            }),
            ("log_scale", &|| {
                self.log_scale.to_array().iter().all(|v| v.is_finite())
            }),
            ("rotation", &|| self.rotation.iter().all(|v| v.is_finite())),
            ("opacity_logit", &|| self.opacity_logit.is_finite()),
            ("sh", &|| {
                self.sh.iter().all(|row| row.iter().all(|v| v.is_finite()))
            }),
        ];
        for (field, ok) in fields {
            if !ok() {
                return Err(ModelError::NonFinite { index, field });
            }
        }
        let norm = self.rotation_norm().widen();
        if norm < 1e-12 {
            return Err(ModelError::DegenerateRotation { index, norm });
        }
        Ok(())
    }
}

/// An ordered collection of primitives; ids are positions in `primitives`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene<T> {
    pub primitives: Vec<GaussianPrimitive<T>>,
    /// Free-form provenance label carried into reports.
    pub source_tag: String,
}

impl<T: Scalar> Scene<T> {
    pub fn new(primitives: Vec<GaussianPrimitive<T>>, source_tag: impl Into<String>) -> Self {
        Self {
            primitives,
            source_tag: source_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate(i)?;
        }
        Ok(())
    }
}

/// Pinhole camera with a rigid world-to-camera transform. Camera space is
/// x-right, y-down, z-forward; a point is visible when its camera-space z is
/// in front of the near plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraView<T> {
    pub width: u32,
    pub height: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    /// World-to-camera rotation (row-major).
    pub rotation: Mat3<T>,
    /// World-to-camera translation.
    pub translation: Vec3<T>,
    /// Label used for image files and per-view report rows.
    pub name: String,
    /// Reference image for metric and score computations, when available.
    pub ground_truth: Option<Image<T>>,
}

impl<T: Scalar> CameraView<T> {
    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        -(self.rotation.transpose().mul_vec(self.translation))
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Opacity activation: logistic sigmoid of the stored logit.
pub fn activate_opacity<T: Scalar>(logit: T) -> T {
    T::one() / (T::one() + (-logit).exp())
}

/// World-space covariance `R S S^T R^T` of a primitive, where `R` comes from
/// the (normalized) rotation quaternion and `S = diag(exp(log_scale))`.
pub fn build_covariance_3d<T: Scalar>(prim: &GaussianPrimitive<T>) -> Result<Mat3<T>, ModelError> {
    let norm = prim.rotation_norm().widen();
    // NaN norms land here too, not only vanishing ones.
    if norm.is_nan() || norm < 1e-12 {
        return Err(ModelError::DegenerateRotation { index: 0, norm });
    }
    let r = quaternion_to_rotation(prim.rotation);
    let s = Vec3::new(
        prim.log_scale.x.exp(),
        prim.log_scale.y.exp(),
        prim.log_scale.z.exp(),
    );
    // M = R * S, then Sigma = M * M^T.
    let mut m = [[T::zero(); 3]; 3];
    let sv = s.to_array();
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = r.rows[i][j] * sv[j];
        }
    }
    let m = Mat3::from_rows(m);
    Ok(m.mul_mat(&m.transpose()))
}

/// View-dependent color from degree-3 real spherical harmonics, with the
/// conventional +0.5 offset and a clamp at zero. `dir` must be unit length.
pub fn evaluate_sh<T: Scalar>(sh: &[[T; 3]; SH_COEFF_COUNT], dir: Vec3<T>) -> Color<T> {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    let basis: [T; SH_COEFF_COUNT] = [
        T::of(SH_C0),
        -T::of(SH_C1) * y,
        T::of(SH_C1) * z,
        -T::of(SH_C1) * x,
        T::of(SH_C2[0]) * xy,
        T::of(SH_C2[1]) * yz,
        T::of(SH_C2[2]) * (T::of(2.0) * zz - xx - yy),
        T::of(SH_C2[3]) * xz,
        T::of(SH_C2[4]) * (xx - yy),
        T::of(SH_C3[0]) * y * (T::of(3.0) * xx - yy),
        T::of(SH_C3[1]) * xy * z,
        T::of(SH_C3[2]) * y * (T::of(4.0) * zz - xx - yy),
        T::of(SH_C3[3]) * z * (T::of(2.0) * zz - T::of(3.0) * xx - T::of(3.0) * yy),
        T::of(SH_C3[4]) * x * (T::of(4.0) * zz - xx - yy),
        T::of(SH_C3[5]) * z * (xx - yy),
        T::of(SH_C3[6]) * x * (xx - yy - T::of(3.0) * zz),
    ];
    let mut out = [T::zero(); 3];
    for (c, v) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (k, b) in basis.iter().enumerate() {
            acc += *b * sh[k][c];
        }
        *v = (acc + T::of(0.5)).max(T::zero());
    }
    Color::new(out[0], out[1], out[2])
}
