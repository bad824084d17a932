//! Point-to-point iterative closest point registration.

mod kdtree;

use std::time::Duration;

pub use kdtree::KdTree;

use crate::error::{Error, Result};
use crate::geom::{RigidTransform, Vec3};
use crate::solver::{compute_profile, loss, CorrespondenceSet, Method, SolverConfig};

/// Monotonic timer; reads zero where the platform has no clock
/// (wasm32-unknown-unknown).
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    fn start() -> Self {
        Stopwatch()
    }

    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    fn elapsed(self) -> Duration {
        self.0.elapsed()
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    fn elapsed(self) -> Duration {
        Duration::ZERO
    }
}

/// A nonempty set of finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("point cloud contains non-finite coordinates"));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(*p)).collect(),
        }
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop once the mean squared error changes by less than this.
    pub mse_tolerance: f64,
    pub solver: Method,
    pub solver_config: SolverConfig,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 30,
            mse_tolerance: 1e-10,
            solver: Method::Fs3r,
            solver_config: SolverConfig::default(),
        }
    }
}

impl IcpConfig {
    pub fn with_solver(solver: Method) -> Self {
        IcpConfig {
            solver,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.mse_tolerance > 0.0 && self.mse_tolerance.is_finite()) {
            return Err(Error::invalid("mse_tolerance must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps source points onto the target.
    pub transform: RigidTransform,
    /// Mean squared error after each iteration's solve.
    pub loss_trace: Vec<f64>,
    /// Per-iteration global estimates, in order.
    pub transforms: Vec<RigidTransform>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Time spent in profile accumulation and the rigid solve.
    pub solver_time: Duration,
    /// Whole-run time, tree construction included.
    pub wall_time: Duration,
}

impl IcpResult {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(0.0)
    }
}

pub fn icp_register(source: &PointCloud, target: &PointCloud, cfg: &IcpConfig) -> Result<IcpResult> {
    cfg.validate()?;
    let start = Stopwatch::start();
    let tree = KdTree::build(target.points())?;

    let mut estimate = RigidTransform::IDENTITY;
    let mut loss_trace = Vec::with_capacity(cfg.max_iterations);
    let mut transforms = Vec::with_capacity(cfg.max_iterations);
    let mut solver_time = Duration::ZERO;
    let mut previous: Option<f64> = None;
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let moved: Vec<Vec3> = source.points().iter().map(|p| estimate.apply(*p)).collect();
        let mut pre_mse = 0.0;
        let matched: Vec<Vec3> = moved
            .iter()
            .map(|p| {
                let (idx, d2) = tree.nearest(*p);
                pre_mse += d2;
                target.points()[idx]
            })
            .collect();
        pre_mse /= moved.len() as f64;
        let prev = *previous.get_or_insert(pre_mse);

        let corr = CorrespondenceSet::uniform(matched, moved).map_err(|e| wrap(iteration, e))?;
        let t0 = Stopwatch::start();
        let step = cfg
            .solver
            .solve_profile(&compute_profile(&corr), &cfg.solver_config)
            .map_err(|e| wrap(iteration, e))?;
        solver_time += t0.elapsed();

        estimate = step.after(&estimate);
        let mse = loss(&corr, &step);
        loss_trace.push(mse);
        transforms.push(estimate);
        previous = Some(mse);
        if (mse - prev).abs() < cfg.mse_tolerance {
            converged = true;
            break;
        }
    }

    Ok(IcpResult {
        transform: estimate,
        iterations_run: loss_trace.len(),
        loss_trace,
        transforms,
        converged,
        solver_time,
        wall_time: start.elapsed(),
    })
}

fn wrap(iteration: usize, e: Error) -> Error {
    Error::Icp {
        iteration,
        source: Box::new(e),
    }
}
