//! Fixed-size linear algebra and rotation representations.
//!
//! Everything here is a small `Copy` value type. Rotation matrices follow the
//! convention `b = C r`: a [`RigidTransform`] maps reference-frame points into
//! the body frame.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_squared(self, o: Vec3) -> f64 {
        (self - o).norm_squared()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3x3 matrix; `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Mat3 { m }
    }

    pub fn from_diagonal(d: Vec3) -> Self {
        Mat3::from_rows([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    /// `a bᵀ`
    pub fn outer(a: Vec3, b: Vec3) -> Self {
        let (a, b) = (a.to_array(), b.to_array());
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i] * b[j];
            }
        }
        Mat3 { m }
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3::from_rows([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// `‖CᵀC − I‖∞` measured entrywise.
    pub fn orthogonality_error(&self) -> f64 {
        (self.transpose() * *self - Mat3::IDENTITY).max_abs()
    }

    pub fn is_special_orthogonal(&self, tol: f64) -> bool {
        self.is_finite() && self.orthogonality_error() < tol && (self.det() - 1.0).abs() < tol
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.m[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.m[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        out
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

/// Symmetric 4x4 matrix stored as its upper triangle.
///
/// Storage order is `(0,0) (0,1) (0,2) (0,3) (1,1) (1,2) (1,3) (2,2) (2,3) (3,3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat4Sym {
    upper: [f64; 10],
}

impl Mat4Sym {
    pub const ZERO: Mat4Sym = Mat4Sym { upper: [0.0; 10] };

    #[inline]
    const fn slot(i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        // row offsets into the packed upper triangle: 0, 4, 7, 9
        [0, 4, 7, 9][r] + (c - r)
    }

    pub fn from_upper(upper: [f64; 10]) -> Self {
        Mat4Sym { upper }
    }

    pub fn upper(&self) -> [f64; 10] {
        self.upper
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Mat4Sym::ZERO;
        for i in 0..4 {
            for j in i..4 {
                out.upper[Self::slot(i, j)] = f(i, j);
            }
        }
        out
    }

    pub fn from_diagonal(d: [f64; 4]) -> Self {
        Mat4Sym::from_fn(|i, j| if i == j { d[i] } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[Self::slot(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.upper[Self::slot(i, j)] = v;
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let mut rows = [[0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        rows
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.get(i, i)).sum()
    }

    /// `self − s·I`
    pub fn shifted(&self, s: f64) -> Mat4Sym {
        let mut out = *self;
        for i in 0..4 {
            out.set(i, i, self.get(i, i) - s);
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..4)
            .map(|i| (0..4).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn mul_vec(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn det(&self) -> f64 {
        (0..4)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.get(0, j) * self.minor(0, j)
            })
            .sum()
    }

    /// Determinant of the 3x3 submatrix with row `skip_row` and column
    /// `skip_col` removed.
    pub fn minor(&self, skip_row: usize, skip_col: usize) -> f64 {
        const KEEP: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
        let (r, c) = (KEEP[skip_row], KEEP[skip_col]);
        let e = |i: usize, j: usize| self.get(r[i], c[j]);
        e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
            - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }
}

/// Scalar-first quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quaternion { q0, q1, q2, q3 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.q0 * o.q0 + self.q1 * o.q1 + self.q2 * o.q2 + self.q3 * o.q3
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.q1, self.q2, self.q3)
    }

    /// Unit-norm copy with the canonical sign applied.
    pub fn normalized(self) -> Result<Quaternion> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid(format!("cannot normalize quaternion of norm {n}")));
        }
        let a = self.to_array().map(|v| v / n);
        Ok(Quaternion::from_array(a).canonical())
    }

    /// Picks the representative of `±q` whose first nonzero component is
    /// positive (so `q0 ≥ 0` whenever `q0 ≠ 0`).
    pub fn canonical(self) -> Quaternion {
        let a = self.to_array();
        match a.iter().find(|v| **v != 0.0) {
            Some(v) if *v < 0.0 => Quaternion::from_array(a.map(|x| -x)),
            _ => self,
        }
    }

    /// Distance between the rotations represented by two unit quaternions,
    /// insensitive to the sign ambiguity.
    pub fn sign_invariant_distance(self, o: Quaternion) -> f64 {
        let plus = Quaternion::from_array([
            self.q0 + o.q0,
            self.q1 + o.q1,
            self.q2 + o.q2,
            self.q3 + o.q3,
        ]);
        let minus = Quaternion::from_array([
            self.q0 - o.q0,
            self.q1 - o.q1,
            self.q2 - o.q2,
            self.q3 - o.q3,
        ]);
        plus.norm().min(minus.norm())
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::from_array(self.to_array().map(|v| -v))
    }
}

/// Rotation matrix of a unit quaternion.
///
/// `C = (q0² − vᵀv) I + 2 v vᵀ − 2 q0 [v]ₓ` with `v = (q1, q2, q3)`. This is
/// the map under which the dominant eigenvector of the registration matrix
/// rotates reference points onto body points.
pub fn quat_to_rotation(q: Quaternion) -> Result<Mat3> {
    let n = q.norm();
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!("quaternion norm {n} is not 1")));
    }
    let Quaternion { q0, q1, q2, q3 } = q;
    let (q00, q11, q22, q33) = (q0 * q0, q1 * q1, q2 * q2, q3 * q3);
    Ok(Mat3::from_rows([
        [
            q00 + q11 - q22 - q33,
            2.0 * (q1 * q2 + q0 * q3),
            2.0 * (q1 * q3 - q0 * q2),
        ],
        [
            2.0 * (q1 * q2 - q0 * q3),
            q00 - q11 + q22 - q33,
            2.0 * (q2 * q3 + q0 * q1),
        ],
        [
            2.0 * (q1 * q3 + q0 * q2),
            2.0 * (q2 * q3 - q0 * q1),
            q00 - q11 - q22 + q33,
        ],
    ]))
}

/// Inverse of [`quat_to_rotation`] (Shepperd's method), canonical sign.
pub fn rotation_to_quat(c: &Mat3) -> Result<Quaternion> {
    if !c.is_finite() || c.orthogonality_error() > 1e-6 || (c.det() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("matrix is not a rotation"));
    }
    let m = &c.m;
    let tr = c.trace();
    let diag = [m[0][0], m[1][1], m[2][2]];
    // antisymmetric parts give q0·qk, symmetric parts give qj·qk
    let (a1, a2, a3) = (m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]);
    let (s12, s13, s23) = (m[0][1] + m[1][0], m[0][2] + m[2][0], m[1][2] + m[2][1]);

    let q = if tr >= diag[0].max(diag[1]).max(diag[2]) {
        let w = 0.5 * (1.0 + tr).sqrt();
        let f = 0.25 / w;
        [w, a1 * f, a2 * f, a3 * f]
    } else if diag[0] >= diag[1] && diag[0] >= diag[2] {
        let x = 0.5 * (1.0 + diag[0] - diag[1] - diag[2]).sqrt();
        let f = 0.25 / x;
        [a1 * f, x, s12 * f, s13 * f]
    } else if diag[1] >= diag[2] {
        let y = 0.5 * (1.0 - diag[0] + diag[1] - diag[2]).sqrt();
        let f = 0.25 / y;
        [a2 * f, s12 * f, y, s23 * f]
    } else {
        let z = 0.5 * (1.0 - diag[0] - diag[1] + diag[2]).sqrt();
        let f = 0.25 / z;
        [a3 * f, s13 * f, s23 * f, z]
    };
    Quaternion::from_array(q).normalized()
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::from_rows([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::from_rows([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

/// Roll `phi` about x, then pitch `theta` about y, then yaw `psi` about z,
/// all about fixed axes: `C = Rz(psi) · Ry(theta) · Rx(phi)`.
pub fn euler_xyz_to_rotation(phi: f64, theta: f64, psi: f64) -> Mat3 {
    rot_z(psi) * rot_y(theta) * rot_x(phi)
}

/// Below this `cos(theta)` the roll angle is unobservable and pinned to zero.
const GIMBAL_LOCK_COS: f64 = 1e-12;

/// Inverse of [`euler_xyz_to_rotation`], returning `(phi, theta, psi)` with
/// `theta ∈ [−π/2, π/2]`.
///
/// Roll is read first; pitch and yaw are then taken from `C · Rx(phi)ᵀ`,
/// which keeps the reconstruction exact to rounding even near `|theta| = π/2`
/// where `phi` itself is poorly determined. At gimbal lock `phi = 0` and the
/// whole rotation about the vertical folds into `psi`.
pub fn rotation_to_euler_xyz(c: &Mat3) -> (f64, f64, f64) {
    let m = &c.m;
    let cos_theta = m[2][1].hypot(m[2][2]);
    let phi = if cos_theta > GIMBAL_LOCK_COS {
        m[2][1].atan2(m[2][2])
    } else {
        0.0
    };
    // n = Rz(psi) Ry(theta)
    let n = *c * rot_x(phi).transpose();
    let theta = (-n.m[2][0]).atan2(n.m[2][1].hypot(n.m[2][2]));
    let psi = (-n.m[0][1]).atan2(n.m[1][1]);
    (phi, theta, psi)
}

/// Rotation plus translation acting as `p ↦ C p + T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_euler(phi: f64, theta: f64, psi: f64, translation: Vec3) -> Self {
        RigidTransform::new(euler_xyz_to_rotation(phi, theta, psi), translation)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * first.rotation,
            self.rotation * first.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    pub fn euler_xyz(&self) -> (f64, f64, f64) {
        rotation_to_euler_xyz(&self.rotation)
    }

    pub fn is_valid(&self) -> bool {
        self.translation.is_finite() && self.rotation.is_special_orthogonal(1e-9)
    }
}
