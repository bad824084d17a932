//! Iterative reference solvers.
//!
//! These are deliberately conventional: cyclic Jacobi for the symmetric 4x4
//! eigenproblem, one-sided Jacobi for the 3x3 SVD, and Aberth–Ehrlich
//! iteration for quartic roots. They share no code with the closed-form path
//! beyond profile accumulation, and serve both as test oracles and as the
//! timing baselines.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{quat_to_rotation, Mat3, Mat4Sym, Quaternion, RigidTransform, Vec3};
use crate::solver::{build_g, compute_profile, CharPoly, CorrespondenceSet, ProfileMatrix};

/// Eigen-decomposition of a symmetric 4x4 matrix, sorted by descending
/// eigenvalue; `vectors[k]` pairs with `values[k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPairs4 {
    pub values: [f64; 4],
    pub vectors: [[f64; 4]; 4],
}

const JACOBI_MAX_SWEEPS: usize = 50;

pub fn jacobi_eig_sym4(w: &Mat4Sym) -> Result<EigenPairs4> {
    if !w.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut a = w.to_rows();
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let target = 1e-13 * w.frobenius_norm();
    // twelve off-diagonal entries: if each is below this, the norm meets target
    let skip = target / 12f64.sqrt();

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        let upper = a[0][1] * a[0][1]
            + a[0][2] * a[0][2]
            + a[0][3] * a[0][3]
            + a[1][2] * a[1][2]
            + a[1][3] * a[1][3]
            + a[2][3] * a[2][3];
        let off = (2.0 * upper).sqrt();
        if off <= target {
            converged = true;
            break;
        }
        rotate::<0, 1>(&mut a, &mut v, skip);
        rotate::<0, 2>(&mut a, &mut v, skip);
        rotate::<0, 3>(&mut a, &mut v, skip);
        rotate::<1, 2>(&mut a, &mut v, skip);
        rotate::<1, 3>(&mut a, &mut v, skip);
        rotate::<2, 3>(&mut a, &mut v, skip);
    }
    if !converged {
        return Err(Error::Convergence {
            method: "jacobi_eig_sym4",
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|k| a[k][k]);
    let vectors = order.map(|k| [v[0][k], v[1][k], v[2][k], v[3][k]]);
    Ok(EigenPairs4 { values, vectors })
}

/// Annihilates `a[P][Q]` with a plane rotation, accumulating into `v`.
/// Entries already below `skip` are left alone.
#[inline(always)]
fn rotate<const P: usize, const Q: usize>(a: &mut [[f64; 4]; 4], v: &mut [[f64; 4]; 4], skip: f64) {
    let (p, q) = (P, Q);
    let apq = a[p][q];
    if apq.abs() <= skip {
        return;
    }
    let delta = 0.5 * (a[q][q] - a[p][p]);
    // smaller root of t² + 2(δ/apq)t − 1 = 0, written to avoid cancellation
    let t = apq / (delta + (delta * delta + apq * apq).sqrt().copysign(delta));
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[p][p] -= t * apq;
    a[q][q] += t * apq;
    a[p][q] = 0.0;
    a[q][p] = 0.0;
    for r in 0..4 {
        if r != p && r != q {
            let (g, h) = (a[r][p], a[r][q]);
            a[r][p] = c * g - s * h;
            a[r][q] = s * g + c * h;
            a[p][r] = a[r][p];
            a[q][r] = a[r][q];
        }
        let (g, h) = (v[r][p], v[r][q]);
        v[r][p] = c * g - s * h;
        v[r][q] = s * g + c * h;
    }
}

/// `U · diag(s) · Vᵀ`, singular values descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd3 {
    pub u: Mat3,
    pub s: [f64; 3],
    pub v: Mat3,
}

impl Svd3 {
    pub fn reconstruct(&self) -> Mat3 {
        self.u * Mat3::from_diagonal(Vec3::from_array(self.s)) * self.v.transpose()
    }
}

const SVD_MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd3(a: &Mat3) -> Result<Svd3> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut b = [a.col(0), a.col(1), a.col(2)];
    let mut v = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];

    let mut converged = false;
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = b[p].norm_squared();
            let beta = b[q].norm_squared();
            let gamma = b[p].dot(b[q]);
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            let (bp, bq) = (b[p], b[q]);
            b[p] = bp * c - bq * s;
            b[q] = bp * s + bq * c;
            let (vp, vq) = (v[p], v[q]);
            v[p] = vp * c - vq * s;
            v[q] = vp * s + vq * c;
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            method: "svd3",
            sweeps: SVD_MAX_SWEEPS,
        });
    }

    let mut order = [0usize, 1, 2];
    let sigma = b.map(|c| c.norm());
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let s = order.map(|k| sigma[k]);
    let vs = order.map(|k| v[k]);
    let tiny = s[0] * 1e-14;
    let mut us: Vec<Vec3> = Vec::with_capacity(3);
    for (k, &idx) in order.iter().enumerate() {
        if s[k] > tiny && s[k] > 0.0 {
            us.push(b[idx] * (1.0 / s[k]));
        }
    }
    complete_orthonormal(&mut us);

    Ok(Svd3 {
        u: Mat3::from_cols(us[0], us[1], us[2]),
        s,
        v: Mat3::from_cols(vs[0], vs[1], vs[2]),
    })
}

/// Extends up to two orthonormal vectors to an orthonormal basis.
fn complete_orthonormal(us: &mut Vec<Vec3>) {
    if us.is_empty() {
        us.push(Vec3::new(1.0, 0.0, 0.0));
    }
    if us.len() == 1 {
        let u0 = us[0];
        // the axis least aligned with u0
        let a = u0.to_array().map(f64::abs);
        let axis = if a[0] <= a[1] && a[0] <= a[2] {
            Vec3::new(1.0, 0.0, 0.0)
        } else if a[1] <= a[2] {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(0.0, 0.0, 1.0)
        };
        let u1 = u0.cross(axis);
        us.push(u1 * (1.0 / u1.norm()));
    }
    if us.len() == 2 {
        let u2 = us[0].cross(us[1]);
        us.push(u2 * (1.0 / u2.norm()));
    }
}

/// SVD registration with the determinant correction, so the result is a
/// proper rotation even when the best orthogonal fit is a reflection.
pub fn svd_rigid_solve(corr: &CorrespondenceSet) -> Result<RigidTransform> {
    svd_rigid_from_profile(&compute_profile(corr))
}

pub fn svd_rigid_from_profile(profile: &ProfileMatrix) -> Result<RigidTransform> {
    let svd = svd3(&profile.h)?;
    let d = (svd.u * svd.v.transpose()).det().signum();
    let rotation = svd.u * Mat3::from_diagonal(Vec3::new(1.0, 1.0, d)) * svd.v.transpose();
    let translation = profile.b_bar - rotation * profile.r_bar;
    Ok(RigidTransform::new(rotation, translation))
}

/// Registration through a numerical eigen-decomposition of the 4x4 matrix.
pub fn eig_rigid_solve(corr: &CorrespondenceSet) -> Result<RigidTransform> {
    eig_rigid_from_profile(&compute_profile(corr))
}

pub fn eig_rigid_from_profile(profile: &ProfileMatrix) -> Result<RigidTransform> {
    let q = eig_quaternion(&build_g(&profile.h))?;
    let rotation = quat_to_rotation(q)?;
    let translation = profile.b_bar - rotation * profile.r_bar;
    Ok(RigidTransform::new(rotation, translation))
}

/// Dominant eigenvector of `g` as a canonical unit quaternion.
pub fn eig_quaternion(g: &Mat4Sym) -> Result<Quaternion> {
    let pairs = jacobi_eig_sym4(g)?;
    Quaternion::from_array(pairs.vectors[0]).normalized()
}

const ABERTH_MAX_ITER: usize = 500;

/// All four roots of `x⁴ + τ₁x² + τ₂x + τ₃` by simultaneous Aberth–Ehrlich
/// iteration, followed by Newton polishing of each root.
pub fn quartic_roots_numeric(cp: &CharPoly) -> [Complex64; 4] {
    let coeffs = [1.0, 0.0, cp.tau1, cp.tau2, cp.tau3];
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in &coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };

    // Cauchy bound on root magnitude
    let radius = 1.0 + coeffs[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: [Complex64; 4] =
        std::array::from_fn(|k| Complex64::from_polar(radius, 0.4 + k as f64 * std::f64::consts::FRAC_PI_2));

    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step = 0.0f64;
        for k in 0..4 {
            let (p, dp) = eval(z[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..4)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-16 {
            break;
        }
    }

    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*root);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *root - p / dp;
            if next.is_finite() && eval(next).0.norm() < p.norm() {
                *root = next;
            } else {
                break;
            }
        }
    }
    z
}
