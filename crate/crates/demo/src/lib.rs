//! Browser bindings for the registration solvers.
//!
//! Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use fs3r::datagen::{generate, table1_cases_with_seed, SampleRng};
use fs3r::icp::{icp_register, IcpConfig, PointCloud};
use fs3r::oracle::quartic_roots_numeric;
use fs3r::solver::{loss, solve, SolverConfig};
use fs3r::{Mat3, Method, RigidTransform, Vec3};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(r: fs3r::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn case_spec(case_id: u32, seed: u32) -> fs3r::Result<fs3r::datagen::CaseSpec> {
    table1_cases_with_seed(u64::from(seed))
        .into_iter()
        .find(|c| c.id == case_id)
        .ok_or_else(|| fs3r::Error::InvalidArgument(format!("no case {case_id}; cases are 1 to 9")))
}

/// Angle of the relative rotation, in degrees, from `‖A − B‖F = 2√2 sin(θ/2)`.
fn rotation_gap_deg(a: &Mat3, b: &Mat3) -> f64 {
    let chord = (*a - *b).frobenius_norm() / (2.0 * std::f64::consts::SQRT_2);
    (2.0 * chord.min(1.0).asin()).to_degrees()
}

#[derive(Serialize)]
struct Pose {
    euler: [f64; 3],
    translation: [f64; 3],
}

impl From<&RigidTransform> for Pose {
    fn from(t: &RigidTransform) -> Self {
        let (phi, theta, psi) = t.euler_xyz();
        Pose {
            euler: [phi, theta, psi],
            translation: t.translation.to_array(),
        }
    }
}

#[derive(Serialize)]
struct SolverRow {
    solver: &'static str,
    pose: Pose,
    loss: f64,
    rotation_error_deg: f64,
}

#[derive(Serialize)]
struct CaseReport {
    case_id: u32,
    n: usize,
    rank: u8,
    noise_variance: [f64; 3],
    truth: Pose,
    solvers: Vec<SolverRow>,
    tau: [f64; 3],
    lambda_max: f64,
    degenerate: bool,
}

fn case_report(case_id: u32, seed: u32) -> fs3r::Result<CaseReport> {
    let spec = case_spec(case_id, seed)?;
    let inst = generate(&spec)?;
    let corr = &inst.correspondences;
    let cfg = SolverConfig::default();
    let closed = solve(corr, &cfg)?;
    let mut solvers = Vec::new();
    for m in Method::ALL {
        let t = m.solve(corr, &cfg)?;
        solvers.push(SolverRow {
            solver: m.name(),
            pose: Pose::from(&t),
            loss: loss(corr, &t),
            rotation_error_deg: rotation_gap_deg(&t.rotation, &inst.truth.rotation),
        });
    }
    let cp = closed.char_poly;
    Ok(CaseReport {
        case_id,
        n: spec.n,
        rank: spec.rank_d,
        noise_variance: spec.noise_cov_diag.to_array(),
        truth: Pose::from(&inst.truth),
        solvers,
        tau: [cp.tau1, cp.tau2, cp.tau3],
        lambda_max: closed.eigen.lambda_max,
        degenerate: closed.eigen.degenerate,
    })
}

/// Registers one of the nine standard cases with every solver.
#[wasm_bindgen]
pub fn register_case(case_id: u32, seed: u32) -> String {
    to_json(case_report(case_id, seed))
}

#[derive(Serialize)]
struct Curve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    lambda_max: f64,
    /// Real parts of the numerically found roots with negligible imaginary part.
    real_roots: Vec<f64>,
}

fn curve(case_id: u32, seed: u32, samples: u32) -> fs3r::Result<Curve> {
    if samples < 2 {
        return Err(fs3r::Error::InvalidArgument("need at least two samples".into()));
    }
    let inst = generate(&case_spec(case_id, seed)?)?;
    let sol = solve(&inst.correspondences, &SolverConfig::default())?;
    let cp = sol.char_poly;
    let lambda_max = sol.eigen.lambda_max;
    let half = 1.25 * lambda_max.abs().max(1e-12);
    let xs: Vec<f64> = (0..samples)
        .map(|k| -half + 2.0 * half * f64::from(k) / f64::from(samples - 1))
        .collect();
    let ys = xs.iter().map(|&x| cp.eval(x)).collect();
    let mut real_roots: Vec<f64> = quartic_roots_numeric(&cp)
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * half)
        .map(|z| z.re)
        .collect();
    real_roots.sort_by(f64::total_cmp);
    Ok(Curve {
        xs,
        ys,
        lambda_max,
        real_roots,
    })
}

/// Samples the characteristic quartic of a case around its largest root.
#[wasm_bindgen]
pub fn quartic_curve(case_id: u32, seed: u32, samples: u32) -> String {
    to_json(curve(case_id, seed, samples))
}

#[derive(Serialize)]
struct IcpRun {
    solver: &'static str,
    loss_trace: Vec<f64>,
    converged: bool,
    pose: Pose,
    rotation_error_deg: f64,
}

#[derive(Serialize)]
struct IcpDemo {
    truth: Pose,
    source: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
    aligned: Vec<[f64; 3]>,
    runs: Vec<IcpRun>,
}

/// Points shipped back to the page for drawing.
const MAX_DRAWN: usize = 400;

fn icp_demo(points: u32, angle_deg: f64, noise_sd: f64, seed: u32) -> fs3r::Result<IcpDemo> {
    if !(angle_deg.is_finite() && noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(fs3r::Error::InvalidArgument("angle and noise must be finite, noise non-negative".into()));
    }
    let a = angle_deg.to_radians();
    let truth = RigidTransform::from_euler(a, -0.5 * a, 0.75 * a, Vec3::new(0.05, -0.03, 0.02));
    let mut rng = SampleRng::new(u64::from(seed));
    let mut cube = || Vec3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0));
    let src: Vec<Vec3> = (0..points).map(|_| cube()).collect();
    let tgt: Vec<Vec3> = src
        .iter()
        .map(|p| {
            let eta = Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
            truth.apply(*p) + eta * noise_sd
        })
        .collect();
    let source = PointCloud::new(src)?;
    let target = PointCloud::new(tgt)?;

    let mut runs = Vec::new();
    let mut aligned = Vec::new();
    for m in [Method::Fs3r, Method::Svd] {
        let r = icp_register(&source, &target, &IcpConfig::with_solver(m))?;
        if m == Method::Fs3r {
            aligned = source.transformed(&r.transform).points().iter().take(MAX_DRAWN).map(|p| p.to_array()).collect();
        }
        runs.push(IcpRun {
            solver: m.name(),
            converged: r.converged,
            pose: Pose::from(&r.transform),
            rotation_error_deg: rotation_gap_deg(&r.transform.rotation, &truth.rotation),
            loss_trace: r.loss_trace,
        });
    }
    let drawn = |c: &PointCloud| c.points().iter().take(MAX_DRAWN).map(|p| p.to_array()).collect();
    Ok(IcpDemo {
        truth: Pose::from(&truth),
        source: drawn(&source),
        target: drawn(&target),
        aligned,
        runs,
    })
}

/// Runs ICP with the closed-form and SVD solvers on a synthetic cube cloud
/// displaced by a rotation of roughly `angle_deg` degrees.
#[wasm_bindgen]
pub fn icp_trace(points: u32, angle_deg: f64, noise_sd: f64, seed: u32) -> String {
    to_json(icp_demo(points, angle_deg, noise_sd, seed))
}
