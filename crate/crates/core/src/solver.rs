//! Closed-form rigid registration.
//!
//! The optimal rotation is the dominant eigenvector of a traceless symmetric
//! 4x4 matrix built from the weighted cross-covariance of the correspondences.
//! Its largest eigenvalue is obtained from the depressed characteristic
//! quartic `λ⁴ + τ₁λ² + τ₂λ + τ₃` in real arithmetic, and the eigenvector from
//! 3x3 cofactors of `G − λI`. No iteration is involved anywhere.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{quat_to_rotation, Mat3, Mat4Sym, Quaternion, RigidTransform, Vec3};
use crate::oracle;

/// Paired body/reference points with positive weights.
///
/// Sets with fewer than three pairs are accepted but underdetermined: the
/// solver returns an algebraically valid minimiser, not a unique one.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    body: Vec<Vec3>,
    reference: Vec<Vec3>,
    weights: Vec<f64>,
}

impl CorrespondenceSet {
    pub fn new(body: Vec<Vec3>, reference: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if body.is_empty() {
            return Err(Error::invalid("correspondence set is empty"));
        }
        if body.len() != reference.len() || body.len() != weights.len() {
            return Err(Error::invalid(format!(
                "length mismatch: {} body, {} reference, {} weights",
                body.len(),
                reference.len(),
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::invalid(format!("weight {i} is {w}, must be positive")));
        }
        if let Some(i) = body
            .iter()
            .zip(&reference)
            .position(|(b, r)| !(b.is_finite() && r.is_finite()))
        {
            return Err(Error::invalid(format!("pair {i} has a non-finite coordinate")));
        }
        Ok(CorrespondenceSet {
            body,
            reference,
            weights,
        })
    }

    /// Equal weights on every pair.
    pub fn uniform(body: Vec<Vec3>, reference: Vec<Vec3>) -> Result<Self> {
        let n = body.len();
        Self::new(body, reference, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn body(&self) -> &[Vec3] {
        &self.body
    }

    pub fn reference(&self) -> &[Vec3] {
        &self.reference
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights scaled to sum to one. Equal weights map to exactly `1/n`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let first = self.weights[0];
        if self.weights.iter().all(|w| *w == first) {
            return vec![1.0 / self.len() as f64; self.len()];
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Copy with every weight multiplied by `k`.
    pub fn with_scaled_weights(&self, k: f64) -> Result<Self> {
        Self::new(
            self.body.clone(),
            self.reference.clone(),
            self.weights.iter().map(|w| w * k).collect(),
        )
    }
}

/// Weighted cross-covariance of the centred correspondences and the two
/// weighted centroids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMatrix {
    pub h: Mat3,
    pub b_bar: Vec3,
    pub r_bar: Vec3,
    pub weight_sum_pre_normalization: f64,
}

/// `H = Σ aᵢ (bᵢ rᵢᵀ − b̄ r̄ᵀ)` with weights normalised to unit sum.
///
/// Accumulated in a single pass over coordinates shifted by the first pair;
/// `H` is invariant to that shift and the shift keeps large common offsets
/// from cancelling catastrophically.
pub fn compute_profile(corr: &CorrespondenceSet) -> ProfileMatrix {
    let first = corr.weights[0];
    let uniform = corr.weights.iter().all(|w| *w == first);
    let total: f64 = corr.weights.iter().sum();
    let inv_n = 1.0 / corr.len() as f64;
    let shift_b = corr.body[0];
    let shift_r = corr.reference[0];

    let mut sum_b = [0.0f64; 3];
    let mut sum_r = [0.0f64; 3];
    let mut s = [[0.0f64; 3]; 3];
    for ((b, r), w) in corr.body.iter().zip(&corr.reference).zip(&corr.weights) {
        let a = if uniform { inv_n } else { w / total };
        let db = (*b - shift_b).to_array();
        let dr = (*r - shift_r).to_array();
        let adb = [a * db[0], a * db[1], a * db[2]];
        for i in 0..3 {
            sum_b[i] += adb[i];
            sum_r[i] += dr[i] * a;
            for j in 0..3 {
                s[i][j] += adb[i] * dr[j];
            }
        }
    }
    let (sum_b, sum_r) = (Vec3::from_array(sum_b), Vec3::from_array(sum_r));
    let h = Mat3::from_rows(s) - Mat3::outer(sum_b, sum_r);
    ProfileMatrix {
        h,
        b_bar: shift_b + sum_b,
        r_bar: shift_r + sum_r,
        weight_sum_pre_normalization: total,
    }
}

/// The 4x4 registration matrix written entry by entry from `H`.
///
/// With `H` laid out as rows `(Hx1 Hy1 Hz1; Hx2 Hy2 Hz2; Hx3 Hy3 Hz3)`.
pub fn build_w(h: &Mat3) -> Mat4Sym {
    let [[hx1, hy1, hz1], [hx2, hy2, hz2], [hx3, hy3, hz3]] = h.m;
    let mut w = Mat4Sym::ZERO;
    w.set(0, 0, hx1 + hy2 + hz3);
    w.set(0, 1, -hy3 + hz2);
    w.set(0, 2, -hz1 + hx3);
    w.set(0, 3, -hx2 + hy1);
    w.set(1, 1, hx1 - hy2 - hz3);
    w.set(1, 2, hx2 + hy1);
    w.set(1, 3, hx3 + hz1);
    w.set(2, 2, hy2 - hx1 - hz3);
    w.set(2, 3, hy3 + hz2);
    w.set(3, 3, hz3 - hy2 - hx1);
    w
}

/// The same matrix in block form: `[tr D, zᵀ; z, D + Dᵀ − tr(D) I]` with
/// `z = (D₂₃ − D₃₂, D₃₁ − D₁₃, D₁₂ − D₂₁)`.
#[allow(clippy::needless_range_loop)]
pub fn build_g(d: &Mat3) -> Mat4Sym {
    let m = &d.m;
    let tr = d.trace();
    let z = [m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]];
    let mut g = Mat4Sym::ZERO;
    g.set(0, 0, tr);
    for i in 0..3 {
        g.set(0, i + 1, z[i]);
        for j in i..3 {
            let diag = if i == j { tr } else { 0.0 };
            g.set(i + 1, j + 1, m[i][j] + m[j][i] - diag);
        }
    }
    g
}

/// Coefficients of `λ⁴ + τ₁λ² + τ₂λ + τ₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoly {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl CharPoly {
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        x2 * x2 + self.tau1 * x2 + self.tau2 * x + self.tau3
    }

    pub fn derivative(&self, x: f64) -> f64 {
        4.0 * x * x * x + 2.0 * self.tau1 * x + self.tau2
    }

    /// `|p(x)| / max(1, x⁴)`
    pub fn relative_residual(&self, x: f64) -> f64 {
        self.eval(x).abs() / x.powi(4).max(1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.tau1.is_finite() && self.tau2.is_finite() && self.tau3.is_finite()
    }
}

pub fn char_coeffs(h: &Mat3, w: &Mat4Sym) -> CharPoly {
    let [[hx1, hy1, hz1], [hx2, hy2, hz2], [hx3, hy3, hz3]] = h.m;
    let tau1 = -2.0 * h.m.iter().flatten().map(|v| v * v).sum::<f64>();
    let tau2 = 8.0
        * (hx3 * hy2 * hz1 - hx2 * hy3 * hz1 - hx3 * hy1 * hz2
            + hx1 * hy3 * hz2
            + hx2 * hy1 * hz3
            - hx1 * hy2 * hz3);
    CharPoly {
        tau1,
        tau2,
        tau3: w.det(),
    }
}

/// What to do when the primary cofactor row set yields no usable eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CofactorFallback {
    /// Try all four cofactor columns and keep the largest; if `G − λI` has a
    /// null space of dimension two or more, take a vector from it directly.
    #[default]
    LargestOfFourRowSets,
    /// Report [`Error::DegenerateEigenvector`] instead.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative tolerance below which `τ₂` or `T₂` count as zero.
    pub xi: f64,
    pub cofactor_fallback: CofactorFallback,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            xi: 1e-8,
            cofactor_fallback: CofactorFallback::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_xi(xi: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::invalid(format!("xi must be positive, got {xi}")));
        }
        Ok(SolverConfig {
            xi,
            ..Default::default()
        })
    }
}

/// Intermediate quantities of the closed-form eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSolution {
    pub t0: f64,
    pub alpha_t1: f64,
    pub beta_t1: f64,
    pub theta: f64,
    pub t2: f64,
    pub lambda_max: f64,
    /// Set when `τ₂` or `T₂` is negligible and the limiting form was used.
    pub degenerate: bool,
}

/// Discriminant values above `−DISCRIMINANT_CLAMP · scale` are roundoff.
const DISCRIMINANT_CLAMP: f64 = 1e-8;
/// `τ₁² − 4τ₃` below this fraction of `τ₁²` is treated as an exact double root.
const DOUBLE_ROOT_TOL: f64 = 1e-12;

/// Largest root of the characteristic quartic.
///
/// The cube root of the complex resolvent quantity is taken in polar form,
/// so only real arithmetic is needed. When `τ₂` vanishes (planar or
/// collinear data) the quartic is biquadratic and the root is taken from
/// `λ² = (−τ₁ + √(τ₁² − 4τ₃)) / 2`, corrected to first order in `τ₂`; for
/// collinear data this is exactly `√(−τ₁/2)`.
pub fn max_eigenvalue(cp: &CharPoly, cfg: &SolverConfig) -> Result<EigenSolution> {
    let CharPoly { tau1, tau2, tau3 } = *cp;
    if !cp.is_finite() {
        return Err(Error::NumericDomain {
            what: "characteristic coefficients",
            value: f64::NAN,
        });
    }
    if tau1 > 0.0 {
        return Err(Error::NumericDomain {
            what: "tau1 (must be non-positive)",
            value: tau1,
        });
    }

    let t0 = 2.0 * tau1.powi(3) + 27.0 * tau2 * tau2 - 72.0 * tau1 * tau3;
    let p = (tau1 * tau1 + 12.0 * tau3).max(0.0);
    let mut disc = 4.0 * p.powi(3) - t0 * t0;
    if disc < 0.0 {
        let scale = (t0 * t0).max(tau1.powi(6));
        if disc < -DISCRIMINANT_CLAMP * scale {
            return Err(Error::NumericDomain {
                what: "resolvent discriminant",
                value: disc,
            });
        }
        disc = 0.0;
    }
    let root_disc = disc.sqrt();
    let theta = if root_disc < 1e-300 && t0.abs() < 1e-300 {
        0.0
    } else {
        root_disc.atan2(t0)
    };
    let modulus = 2f64.cbrt() * p.sqrt();
    let (sin3, cos3) = (theta / 3.0).sin_cos();
    let alpha_t1 = modulus * cos3;
    let beta_t1 = modulus * sin3;
    let t2 = (-4.0 * tau1 + 2.0 * 4f64.cbrt() * alpha_t1).max(0.0).sqrt();

    let scale = -tau1;
    let regular = tau2.abs() > cfg.xi * scale.powf(1.5) && t2 > cfg.xi * scale.sqrt();
    let sqrt6 = 6f64.sqrt();
    let (lambda_max, degenerate) = if regular {
        let inner = (-t2 * t2 - 12.0 * tau1 - 12.0 * sqrt6 * tau2 / t2).max(0.0);
        ((t2 + inner.sqrt()) / (2.0 * sqrt6), false)
    } else {
        (biquadratic_limit(cp), true)
    };

    Ok(EigenSolution {
        t0,
        alpha_t1,
        beta_t1,
        theta,
        t2,
        lambda_max,
        degenerate,
    })
}

fn biquadratic_limit(cp: &CharPoly) -> f64 {
    let CharPoly { tau1, tau2, tau3 } = *cp;
    let half = -tau1 / 2.0;
    let disc = tau1 * tau1 - 4.0 * tau3;
    if disc <= DOUBLE_ROOT_TOL * tau1 * tau1 {
        return half.sqrt();
    }
    let root_disc = disc.sqrt();
    let lambda0 = (half + 0.5 * root_disc).sqrt();
    // p(λ₀) = τ₂λ₀ and p'(λ₀) = 2λ₀√disc + τ₂
    lambda0 - tau2 * lambda0 / (2.0 * lambda0 * root_disc + tau2)
}

/// Relative size below which the fast-path cofactor column is rejected.
const FAST_PATH_REL: f64 = 1e-4;
/// Relative size below which every cofactor column counts as zero.
const COFACTOR_FLOOR: f64 = 1e-14;

/// Cofactor column of `M = G − λI` taken from rows 1–3, written out term by
/// term (1-based entry names).
pub fn primary_cofactor(m: &Mat4Sym) -> [f64; 4] {
    let g = |i: usize, j: usize| m.get(i - 1, j - 1);
    let (g11, g12, g13, g14) = (g(1, 1), g(1, 2), g(1, 3), g(1, 4));
    let (g22, g23, g24) = (g(2, 2), g(2, 3), g(2, 4));
    let (g33, g34) = (g(3, 3), g(3, 4));
    let q0 = g14 * g23 * g23 - g13 * g24 * g23 - g12 * g34 * g23 - g14 * g22 * g33
        + g12 * g24 * g33
        + g13 * g22 * g34;
    let q1 = g24 * g13 * g13 - g12 * g34 * g13 - g13 * g14 * g23 + g12 * g14 * g33
        - g11 * g24 * g33
        + g11 * g23 * g34;
    let q2 = g34 * g12 * g12 - g14 * g23 * g12 - g13 * g24 * g12
        + g13 * g14 * g22
        + g11 * g23 * g24
        - g11 * g22 * g34;
    let q3 = -g33 * g12 * g12 + 2.0 * g13 * g23 * g12 - g11 * g23 * g23 - g13 * g13 * g22
        + g11 * g22 * g33;
    [q0, q1, q2, q3]
}

/// Column `k` of the adjugate of a symmetric 4x4 matrix.
pub fn adjugate_column(m: &Mat4Sym, k: usize) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, v) in out.iter_mut().enumerate() {
        let sign = if (i + k).is_multiple_of(2) { 1.0 } else { -1.0 };
        *v = sign * m.minor(k, i);
    }
    out
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Unit vector in the null space of a symmetric matrix whose rank is at most
/// two: Gram–Schmidt over its columns, then the coordinate axis with the
/// smallest component in their span, orthogonalised.
fn null_vector_low_rank(m: &Mat4Sym) -> [f64; 4] {
    let scale = m.max_abs();
    let rows = m.to_rows();
    let mut cols: Vec<[f64; 4]> = (0..4).map(|j| [rows[0][j], rows[1][j], rows[2][j], rows[3][j]]).collect();
    cols.sort_by(|a, b| norm4(b).total_cmp(&norm4(a)));

    let mut basis: Vec<[f64; 4]> = Vec::with_capacity(3);
    for c in cols {
        if basis.len() == 3 {
            break;
        }
        let r = orthogonalize(c, &basis);
        let n = norm4(&r);
        if n > 1e-8 * scale {
            basis.push(r.map(|x| x / n));
        }
    }

    let best_axis = (0..4)
        .map(|j| {
            let mut e = [0.0; 4];
            e[j] = 1.0;
            let r = orthogonalize(e, &basis);
            (norm4(&r), r)
        })
        .min_by(|a, b| b.0.total_cmp(&a.0))
        .map(|(_, r)| r)
        .unwrap_or([1.0, 0.0, 0.0, 0.0]);
    let n = norm4(&best_axis);
    best_axis.map(|x| x / n)
}

fn orthogonalize(mut v: [f64; 4], basis: &[[f64; 4]]) -> [f64; 4] {
    for b in basis {
        let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
    v
}

/// Unit eigenvector of `G` for the eigenvalue `lambda_max`, from cofactors of
/// `G − λI`, with the canonical quaternion sign.
pub fn eigenvector_for(g: &Mat4Sym, lambda_max: f64, cfg: &SolverConfig) -> Result<Quaternion> {
    let m = g.shifted(lambda_max);
    if !m.is_finite() {
        return Err(Error::NumericDomain {
            what: "G - lambda I",
            value: lambda_max,
        });
    }
    let scale = m.max_abs();
    let scale3 = scale * scale * scale;
    let floor = COFACTOR_FLOOR * scale3;

    let primary = primary_cofactor(&m);
    let primary_norm = norm4(&primary);

    let q = match cfg.cofactor_fallback {
        CofactorFallback::Fail => {
            if !(primary_norm > floor) {
                return Err(Error::DegenerateEigenvector { threshold: floor });
            }
            primary
        }
        CofactorFallback::LargestOfFourRowSets => {
            if primary_norm >= FAST_PATH_REL * scale3 && primary_norm > 0.0 {
                primary
            } else {
                let (best, best_norm) = (0..4)
                    .map(|k| {
                        let c = adjugate_column(&m, k);
                        (c, norm4(&c))
                    })
                    .min_by(|a, b| b.1.total_cmp(&a.1))
                    .expect("four candidates");
                if best_norm > floor && best_norm > 0.0 {
                    best
                } else {
                    null_vector_low_rank(&m)
                }
            }
        }
    };
    Quaternion::from_array(q).normalized()
}

/// Output of a closed-form solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub transform: RigidTransform,
    pub quaternion: Quaternion,
    pub eigen: EigenSolution,
    pub char_poly: CharPoly,
    pub profile: ProfileMatrix,
}

/// Full closed-form registration from weighted correspondences.
pub fn solve(corr: &CorrespondenceSet, cfg: &SolverConfig) -> Result<Solution> {
    let profile = compute_profile(corr);
    solve_profile(&profile, cfg)
}

/// Closed-form registration from an already accumulated profile.
pub fn solve_profile(profile: &ProfileMatrix, cfg: &SolverConfig) -> Result<Solution> {
    let w = build_w(&profile.h);
    let char_poly = char_coeffs(&profile.h, &w);
    let eigen = max_eigenvalue(&char_poly, cfg)?;
    let quaternion = eigenvector_for(&w, eigen.lambda_max, cfg)?;
    let rotation = quat_to_rotation(quaternion)?;
    let translation = profile.b_bar - rotation * profile.r_bar;
    Ok(Solution {
        transform: RigidTransform::new(rotation, translation),
        quaternion,
        eigen,
        char_poly,
        profile: *profile,
    })
}

/// `Σ aᵢ ‖bᵢ − C rᵢ − T‖²` with weights normalised to unit sum.
pub fn loss(corr: &CorrespondenceSet, t: &RigidTransform) -> f64 {
    corr.normalized_weights()
        .iter()
        .zip(corr.body.iter().zip(&corr.reference))
        .map(|(a, (b, r))| a * (*b - t.apply(*r)).norm_squared())
        .sum()
}

/// Interchangeable rigid solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Closed-form quartic solver.
    Fs3r,
    /// Jacobi eigen-decomposition of the same 4x4 matrix.
    Eig,
    /// SVD of the cross-covariance with the determinant correction.
    Svd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fs3r, Method::Eig, Method::Svd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fs3r => "fs3r",
            Method::Eig => "eig",
            Method::Svd => "svd",
        }
    }

    /// Solve from an accumulated profile; all methods share the accumulation.
    pub fn solve_profile(self, profile: &ProfileMatrix, cfg: &SolverConfig) -> Result<RigidTransform> {
        match self {
            Method::Fs3r => solve_profile(profile, cfg).map(|s| s.transform),
            Method::Eig => oracle::eig_rigid_from_profile(profile),
            Method::Svd => oracle::svd_rigid_from_profile(profile),
        }
    }

    pub fn solve(self, corr: &CorrespondenceSet, cfg: &SolverConfig) -> Result<RigidTransform> {
        self.solve_profile(&compute_profile(corr), cfg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fs3r" => Ok(Method::Fs3r),
            "eig" => Ok(Method::Eig),
            "svd" => Ok(Method::Svd),
            other => Err(Error::invalid(format!("unknown solver '{other}' (expected fs3r, eig or svd)"))),
        }
    }
}
