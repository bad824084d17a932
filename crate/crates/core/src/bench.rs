//! Solve-time sweep over correspondence count.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{generate, CaseSpec};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::solver::{compute_profile, Method, SolverConfig};

pub const DEFAULT_SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub seed: u64,
    pub solver_config: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: DEFAULT_SIZES.to_vec(),
            methods: Method::ALL.to_vec(),
            repeats: 1000,
            seed: 1,
            solver_config: SolverConfig::default(),
        }
    }
}

/// Timing summary for one solver at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub solver: String,
    pub mean_ns: f64,
    pub std_ns: f64,
    /// Samples kept after dropping the warm-up tenth.
    pub samples: usize,
    /// This solver's mean over the EIG mean at the same size, when both ran.
    pub ratio_to_eig: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, n: usize, method: Method) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.n == n && r.solver == method.name())
    }

    /// Least-squares slope of `ln(mean)` against `ln(n)` for one solver.
    pub fn loglog_slope(&self, method: Method) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.solver == method.name())
            .map(|r| ((r.n as f64).ln(), r.mean_ns.ln()))
            .collect();
        loglog_fit(&pts)
    }
}

pub fn loglog_fit(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Instance used at every size: a generic full-rank pose with light noise.
pub fn bench_case(n: usize, seed: u64) -> CaseSpec {
    CaseSpec {
        id: 0,
        euler: (0.7, -0.4, 1.9),
        translation: Vec3::new(3.0, -1.0, 2.0),
        noise_cov_diag: Vec3::new(0.01, 0.01, 0.01),
        n,
        rank_d: 3,
        seed,
    }
}

/// Times profile accumulation plus rigid solve. Solvers are interleaved
/// round-robin within each repeat on one thread; the first tenth of the
/// repeats is discarded as warm-up.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if cfg.methods.is_empty() || cfg.sizes.is_empty() {
        return Err(Error::invalid("bench needs at least one solver and one size"));
    }
    let warmup = cfg.repeats / 10;
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let inst = generate(&bench_case(n, cfg.seed))?;
        let corr = &inst.correspondences;
        let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repeats); cfg.methods.len()];
        for rep in 0..cfg.repeats {
            // rotate the starting solver so none always runs first
            for k in 0..cfg.methods.len() {
                let slot = (k + rep) % cfg.methods.len();
                let method = cfg.methods[slot];
                let t0 = Instant::now();
                let profile = compute_profile(black_box(corr));
                let out = method.solve_profile(&profile, &cfg.solver_config)?;
                black_box(out);
                let dt = t0.elapsed().as_nanos() as f64;
                if rep >= warmup {
                    samples[slot].push(dt);
                }
            }
        }
        let stats: Vec<(f64, f64)> = samples.iter().map(|s| mean_std(s)).collect();
        let eig_mean = cfg
            .methods
            .iter()
            .position(|&m| m == Method::Eig)
            .map(|k| stats[k].0);
        for (k, &method) in cfg.methods.iter().enumerate() {
            let (mean_ns, std_ns) = stats[k];
            rows.push(BenchRow {
                n,
                solver: method.name().to_string(),
                mean_ns,
                std_ns,
                samples: samples[k].len(),
                ratio_to_eig: eig_mean.map(|e| mean_ns / e),
            });
        }
    }
    Ok(BenchReport { rows })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
