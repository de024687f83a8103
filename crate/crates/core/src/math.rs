//! Small fixed-size linear algebra used by the projection and rasterization
//! paths. Hand-rolled so every operation has a fixed evaluation order, which
//! keeps renders bit-reproducible across worker counts.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: T) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub rows: [[T; 3]; 3],
}

impl<T: Scalar> Mat3<T> {
    pub fn from_rows(rows: [[T; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn identity() -> Self {
        let o = T::one();
        let z = T::zero();
        Self::from_rows([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.rows;
        Self::from_rows([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.rows;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let a = &self.rows;
        let b = &o.rows;
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self::from_rows(out)
    }

    /// Largest absolute deviation of `R * R^T` from the identity.
    pub fn orthonormality_error(&self) -> T {
        let rrt = self.mul_mat(&self.transpose());
        let mut err = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                err = err.max((rrt.rows[i][j] - target).abs());
            }
        }
        err
    }

    /// Re-orthonormalizes the rows with Gram-Schmidt. Used after reading
    /// cameras whose serialized rotations carry round-off.
    pub fn orthonormalized_rows(&self) -> Self {
        let r0 = Vec3::from_array(self.rows[0]).normalized();
        let r1 = Vec3::from_array(self.rows[1]);
        let r1 = (r1 - r0 * r0.dot(r1)).normalized();
        let r2 = r0.cross(r1);
        Self::from_rows([r0.to_array(), r1.to_array(), r2.to_array()])
    }
}

/// Symmetric 2x2 matrix stored as `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> SymMat2<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }

    pub fn det(&self) -> T {
        self.a * self.c - self.b * self.b
    }

    /// Inverse as `(a, b, c)` of the symmetric inverse matrix.
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.c / d, -self.b / d, self.a / d)
    }

    /// Quadratic form `v^T M v`.
    pub fn quad_form(&self, v: Vec2<T>) -> T {
        self.a * v.x * v.x + (self.b + self.b) * v.x * v.y + self.c * v.y * v.y
    }

    pub fn max_eigenvalue(&self) -> T {
        let half = T::of(0.5);
        let mid = (self.a + self.c) * half;
        let diff = (self.a - self.c) * half;
        mid + (diff * diff + self.b * self.b).sqrt()
    }

    pub fn min_eigenvalue(&self) -> T {
        let half = T::of(0.5);
        let mid = (self.a + self.c) * half;
        let diff = (self.a - self.c) * half;
        mid - (diff * diff + self.b * self.b).sqrt()
    }
}

/// 2x3 matrix; only needed for the perspective Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2x3<T> {
    pub rows: [[T; 3]; 2],
}

impl<T: Scalar> Mat2x3<T> {
    pub fn from_rows(rows: [[T; 3]; 2]) -> Self {
        Self { rows }
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec2<T> {
        let m = &self.rows;
        Vec2::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        )
    }

    /// `J * S * J^T` for symmetric `S`; the result is symmetric by
    /// construction so only the upper triangle is computed.
    pub fn sandwich(&self, s: &Mat3<T>) -> SymMat2<T> {
        let j = &self.rows;
        let mut js = [[T::zero(); 3]; 2];
        for (i, row) in js.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = j[i][0] * s.rows[0][k] + j[i][1] * s.rows[1][k] + j[i][2] * s.rows[2][k];
            }
        }
        let dot = |p: &[T; 3], q: &[T; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
        SymMat2::new(dot(&js[0], &j[0]), dot(&js[0], &j[1]), dot(&js[1], &j[1]))
    }
}

/// Rotation matrix of a quaternion given as `(w, x, y, z)`; the quaternion is
/// normalized first, so any positive scaling of it yields the same rotation.
pub fn quaternion_to_rotation<T: Scalar>(q: [T; 4]) -> Mat3<T> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let two = T::of(2.0);
    let one = T::one();
    Mat3::from_rows([
        [
            one - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            one - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            one - two * (x * x + y * y),
        ],
    ])
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn identity_quaternion_is_identity_rotation() {
        let r = quaternion_to_rotation([1.0f64, 0.0, 0.0, 0.0]);
        assert_eq!(r, Mat3::identity());
    }

    #[test]
    fn quaternion_rotation_is_orthonormal() {
        let r = quaternion_to_rotation([0.9f64, 0.2, -0.3, 0.1]);
        assert!(r.orthonormality_error() < 1e-12);
    }

    #[test]
    fn ninety_degree_z_rotation() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = quaternion_to_rotation([h, 0.0, 0.0, h]);
        let expect = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert_rows_close(r.rows, expect, 1e-12);
    }

    fn assert_rows_close(got: [[f64; 3]; 3], want: [[f64; 3]; 3], eps: f64) {
        for (got_row, want_row) in got.iter().zip(&want) {
            for (&g, &w) in got_row.iter().zip(want_row) {
                assert_relative_eq!(g, w, epsilon = eps);
            }
        }
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let j = Mat2x3::from_rows([[1.0f64, 0.5, -0.25], [0.0, 2.0, 1.0]]);
        let s = Mat3::from_rows([[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 0.5]]);
        let got = j.sandwich(&s);
        // Row-by-row expansion of J S J^T.
        let mut full = [[0.0f64; 2]; 2];
        for (r, row) in full.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                for k in 0..3 {
                    for l in 0..3 {
                        *cell += j.rows[r][k] * s.rows[k][l] * j.rows[c][l];
                    }
                }
            }
        }
        assert_relative_eq!(got.a, full[0][0], epsilon = 1e-12);
        assert_relative_eq!(got.b, full[0][1], epsilon = 1e-12);
        assert_relative_eq!(got.c, full[1][1], epsilon = 1e-12);
    }

    #[test]
    fn symmetric_inverse_and_quad_form() {
        let m = SymMat2::new(2.0f64, 0.3, 0.5);
        let inv = m.inverse();
        // M * M^-1 == I
        assert_relative_eq!(m.a * inv.a + m.b * inv.b, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.a * inv.b + m.b * inv.c, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.b * inv.b + m.c * inv.c, 1.0, epsilon = 1e-12);
        let v = Vec2::new(0.7, -0.2);
        assert_relative_eq!(
            m.quad_form(v),
            2.0 * 0.49 + 2.0 * 0.3 * 0.7 * -0.2 + 0.5 * 0.04,
            epsilon = 1e-12
        );
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let m = SymMat2::new(4.0f64, 0.0, 1.0);
        assert_eq!(m.max_eigenvalue(), 4.0);
        assert_eq!(m.min_eigenvalue(), 1.0);
    }

    #[test]
    fn gram_schmidt_restores_orthonormality() {
        let mut r = quaternion_to_rotation([0.9f64, 0.2, -0.3, 0.1]);
        for row in r.rows.iter_mut() {
            row[0] += 1e-5;
        }
        let fixed = r.orthonormalized_rows();
        assert!(fixed.orthonormality_error() < 1e-12);
        // Stays close to the perturbed input.
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(fixed.rows[i][j], r.rows[i][j], epsilon = 1e-4);
            }
        }
    }
}
