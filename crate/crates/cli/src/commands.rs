use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::time::Instant;

use fs3r::bench::{run_bench, BenchConfig};
use fs3r::datagen::{generate, table1_cases_with_seed, CaseSpec};
use fs3r::icp::{icp_register, IcpConfig, IcpResult};
use fs3r::io::{
    read_ply, write_bench_csv_to, write_bench_json_to, write_records_csv_to, write_records_json_to, RunRecord,
};
use fs3r::solver::{compute_profile, loss, CorrespondenceSet};
use fs3r::{Method, RigidTransform, SolverConfig};
use serde::Serialize;

use crate::{BenchArgs, Common, Failure, Format, IcpArgs, SolveArgs};

/// Agreement required between solvers on full-rank cases.
const AGREEMENT_TOL: f64 = 1e-6;

struct Settings {
    methods: Vec<Method>,
    solver: SolverConfig,
    repeat: usize,
}

fn settings(c: &Common, default_repeat: usize) -> Result<Settings, Failure> {
    let solver = SolverConfig::with_xi(c.xi).map_err(|e| Failure::Usage(e.to_string()))?;
    let repeat = c.repeat.unwrap_or(default_repeat);
    if repeat == 0 {
        return Err(Failure::Usage("--repeat must be at least 1".into()));
    }
    let mut methods = Vec::new();
    for &m in &c.solver {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(Failure::Usage("--solver needs at least one solver".into()));
    }
    Ok(Settings { methods, solver, repeat })
}

fn open_sink(c: &Common) -> Result<Box<dyn Write>, Failure> {
    Ok(match &c.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_records(c: &Common, records: &[RunRecord]) -> Result<(), Failure> {
    let mut sink = open_sink(c)?;
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => write_records_csv_to(records, &mut sink)?,
        Format::Json => write_records_json_to(records, &mut sink)?,
    }
    sink.flush().map_err(|e| Failure::Io(e.to_string()))
}

/// Solves `repeat` times; the first tenth of the runs is not timed.
fn timed_solve(
    method: Method,
    corr: &CorrespondenceSet,
    cfg: &SolverConfig,
    repeat: usize,
) -> fs3r::Result<(RigidTransform, u64)> {
    let warmup = repeat / 10;
    let mut total = 0u128;
    let mut out = RigidTransform::IDENTITY;
    for rep in 0..repeat {
        let t0 = Instant::now();
        out = method.solve_profile(&compute_profile(corr), cfg)?;
        let dt = t0.elapsed().as_nanos();
        if rep >= warmup {
            total += dt;
        }
    }
    let mean = total / (repeat - warmup) as u128;
    Ok((out, (mean as u64).max(1)))
}

fn agree(a: &RigidTransform, b: &RigidTransform) -> bool {
    let scale = a.translation.norm().max(b.translation.norm()).max(1.0);
    (a.rotation - b.rotation).max_abs() <= AGREEMENT_TOL
        && (a.translation - b.translation).norm() <= AGREEMENT_TOL * scale
}

pub fn cases(c: &Common) -> Result<(), Failure> {
    let s = settings(c, 1)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for spec in table1_cases_with_seed(c.seed) {
        let inst = generate(&spec)?;
        let mut solved: Vec<(Method, RigidTransform)> = Vec::new();
        for &m in &s.methods {
            match timed_solve(m, &inst.correspondences, &s.solver, s.repeat) {
                Ok((t, ns)) => {
                    let l = loss(&inst.correspondences, &t);
                    records.push(RunRecord::new(spec.id, m.name(), &t, l, ns, spec.seed));
                    solved.push((m, t));
                }
                Err(e) => failures.push(format!("case {} solver {m}: {e}", spec.id)),
            }
        }
        if spec.rank_d == 3 {
            for (i, (ma, ta)) in solved.iter().enumerate() {
                for (mb, tb) in &solved[i + 1..] {
                    if !agree(ta, tb) {
                        failures.push(format!("case {}: {ma} and {mb} disagree beyond {AGREEMENT_TOL:e}", spec.id));
                    }
                }
            }
        }
    }
    emit_records(c, &records)?;
    report_failures(failures)
}

fn report_failures(failures: Vec<String>) -> Result<(), Failure> {
    if failures.is_empty() {
        return Ok(());
    }
    for f in &failures[..failures.len() - 1] {
        eprintln!("fs3r: {f}");
    }
    Err(Failure::Numeric(failures.last().cloned().unwrap_or_default()))
}

pub fn solve(a: &SolveArgs) -> Result<(), Failure> {
    let c = &a.common;
    let s = settings(c, 1)?;
    let (corr, case_id, seed) = match (&a.source, &a.target, a.case) {
        (Some(src), Some(tgt), None) => {
            let reference = read_ply(src)?.into_points();
            let body = read_ply(tgt)?.into_points();
            if reference.len() != body.len() {
                return Err(Failure::Usage(format!(
                    "point counts differ: {} in {}, {} in {}",
                    reference.len(),
                    src.display(),
                    body.len(),
                    tgt.display()
                )));
            }
            (CorrespondenceSet::uniform(body, reference)?, 0, 0)
        }
        (None, None, Some(id)) => {
            let spec: CaseSpec = table1_cases_with_seed(c.seed)[id as usize - 1];
            (generate(&spec)?.correspondences, id, spec.seed)
        }
        _ => return Err(Failure::Usage("give either SOURCE and TARGET files or --case".into())),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &m in &s.methods {
        match timed_solve(m, &corr, &s.solver, s.repeat) {
            Ok((t, ns)) => records.push(RunRecord::new(case_id, m.name(), &t, loss(&corr, &t), ns, seed)),
            Err(e) => failures.push(format!("solver {m}: {e}")),
        }
    }
    emit_records(c, &records)?;
    report_failures(failures)
}

#[derive(Serialize)]
struct IcpReport {
    solver: String,
    converged: bool,
    iterations: usize,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    euler_xyz: [f64; 3],
    loss_trace: Vec<f64>,
    final_loss: f64,
    wall_time_ns: u64,
    solver_time_ns: u64,
}

impl IcpReport {
    fn new(method: Method, r: &IcpResult) -> Self {
        let (phi, theta, psi) = r.transform.euler_xyz();
        IcpReport {
            solver: method.name().to_string(),
            converged: r.converged,
            iterations: r.iterations_run,
            rotation: r.transform.rotation.m,
            translation: r.transform.translation.to_array(),
            euler_xyz: [phi, theta, psi],
            loss_trace: r.loss_trace.clone(),
            final_loss: r.final_loss(),
            wall_time_ns: nanos(r.wall_time),
            solver_time_ns: nanos(r.solver_time),
        }
    }

    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "solver {}", self.solver)?;
        writeln!(w, "converged {} after {} iterations", self.converged, self.iterations)?;
        writeln!(w, "rotation")?;
        for row in &self.rotation {
            writeln!(w, "  {:>24.16e} {:>24.16e} {:>24.16e}", row[0], row[1], row[2])?;
        }
        let t = self.translation;
        writeln!(w, "translation {:.16e} {:.16e} {:.16e}", t[0], t[1], t[2])?;
        let e = self.euler_xyz;
        writeln!(w, "euler_xyz {:.16e} {:.16e} {:.16e}", e[0], e[1], e[2])?;
        writeln!(w, "loss trace")?;
        for (k, l) in self.loss_trace.iter().enumerate() {
            writeln!(w, "  {:>3} {:.16e}", k + 1, l)?;
        }
        writeln!(
            w,
            "wall time {:.3} ms (solver {:.3} ms)",
            self.wall_time_ns as f64 * 1e-6,
            self.solver_time_ns as f64 * 1e-6
        )
    }
}

fn nanos(d: std::time::Duration) -> u64 {
    (d.as_nanos() as u64).max(1)
}

pub fn icp(a: &IcpArgs) -> Result<(), Failure> {
    let c = &a.common;
    let s = settings(c, 1)?;
    if c.repeat.is_some() {
        return Err(Failure::Usage("--repeat does not apply to icp".into()));
    }
    let source = read_ply(&a.source)?;
    let target = read_ply(&a.target)?;
    let mut reports = Vec::new();
    for &m in &s.methods {
        let cfg = IcpConfig {
            max_iterations: a.max_iterations,
            mse_tolerance: a.tolerance,
            solver: m,
            solver_config: s.solver,
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        let r = icp_register(&source, &target, &cfg)?;
        reports.push((m, r));
    }

    let mut sink = open_sink(c)?;
    let io_err = |e: io::Error| Failure::Io(e.to_string());
    match c.format {
        None => {
            for (k, (m, r)) in reports.iter().enumerate() {
                if k > 0 {
                    writeln!(sink).map_err(io_err)?;
                }
                IcpReport::new(*m, r).write_text(&mut sink).map_err(io_err)?;
            }
        }
        Some(Format::Json) => {
            let all: Vec<IcpReport> = reports.iter().map(|(m, r)| IcpReport::new(*m, r)).collect();
            serde_json::to_writer_pretty(&mut sink, &all).map_err(|e| Failure::Io(e.to_string()))?;
            writeln!(sink).map_err(io_err)?;
        }
        Some(Format::Csv) => {
            let records: Vec<RunRecord> = reports
                .iter()
                .map(|(m, r)| RunRecord::new(0, m.name(), &r.transform, r.final_loss(), nanos(r.wall_time), 0))
                .collect();
            write_records_csv_to(&records, &mut sink)?;
        }
    }
    sink.flush().map_err(io_err)
}

pub fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let c = &a.common;
    let s = settings(c, 1000)?;
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(Failure::Usage("--sizes must list positive counts".into()));
    }
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        methods: s.methods.clone(),
        repeats: s.repeat,
        seed: c.seed,
        solver_config: s.solver,
    };
    let report = run_bench(&cfg)?;
    let mut sink = open_sink(c)?;
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => write_bench_csv_to(&report.rows, &mut sink)?,
        Format::Json => write_bench_json_to(&report.rows, &mut sink)?,
    }
    sink.flush().map_err(|e| Failure::Io(e.to_string()))?;
    for &m in &s.methods {
        if let Some(slope) = report.loglog_slope(m) {
            eprintln!("{m}: log-log slope {slope:.3}");
        }
    }
    Ok(())
}
