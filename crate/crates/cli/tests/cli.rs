use std::path::Path;
use std::process::{Command, Output};

use fs3r::datagen::SampleRng;
use fs3r::io::{read_records_csv, read_records_json, write_ply, PlyFormat};
use fs3r::{RigidTransform, Vec3};

fn fs3r(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fs3r"))
        .args(args)
        .env_remove("FS3R_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Drops the wall-time column so runs can be compared byte for byte.
fn without_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(9);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn cube_cloud(seed: u64, n: usize) -> Vec<Vec3> {
    let mut rng = SampleRng::new(seed);
    (0..n)
        .map(|_| Vec3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)))
        .collect()
}

fn write_cloud(dir: &Path, name: &str, pts: &[Vec3]) -> String {
    let p = dir.join(name);
    write_ply(&p, pts, PlyFormat::BinaryLittleEndian).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
#[allow(clippy::approx_constant)]
fn cases_reproduce_case_one_pose() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cases.csv");
    let o = fs3r(&["cases", "--solver", "fs3r", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_records_csv(&out).unwrap();
    assert_eq!(recs.len(), 9);
    let c1 = &recs[0];
    assert_eq!((c1.case_id, c1.solver.as_str(), c1.seed), (1, "fs3r", 2));
    for (got, want) in [(c1.phi, -0.5235), (c1.theta, 1.1424), (c1.psi, -2.2439)] {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn cases_solvers_agree_on_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cases.csv");
    let o = fs3r(&["cases", "--solver", "fs3r,svd", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_records_csv(&out).unwrap();
    assert_eq!(recs.len(), 18);
    for pair in recs.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!(a.case_id, b.case_id);
        assert_eq!((a.solver.as_str(), b.solver.as_str()), ("fs3r", "svd"));
        if ![2, 3].contains(&a.case_id) {
            assert!(rel(a.loss, b.loss, 1e-12) < 1e-9, "case {}: {} vs {}", a.case_id, a.loss, b.loss);
        }
    }
}

#[test]
fn cases_json_is_an_array_of_records() {
    let dir = tempfile::tempdir().unwrap();
    for (solvers, n) in [("fs3r", 9), ("fs3r,eig", 18)] {
        let out = dir.path().join("cases.json");
        let o = fs3r(&["cases", "--solver", solvers, "--format", "json", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let recs = read_records_json(&out).unwrap();
        assert_eq!(recs.len(), n);
        let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(raw.as_array().unwrap().len(), n);
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = fs3r(&["cases", "--solver", "fs3r,eig,svd", "--seed", "42"]);
    let b = fs3r(&["cases", "--solver", "fs3r,eig,svd", "--seed", "42"]);
    assert_eq!(code(&a), 0);
    assert_eq!(without_timing(&stdout(&a)), without_timing(&stdout(&b)));
    let c = fs3r(&["cases", "--seed", "43"]);
    assert_ne!(without_timing(&stdout(&a)), without_timing(&stdout(&c)));
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let run = |env: &str, extra: &[&str]| {
        let mut args = vec!["solve", "--case", "4"];
        args.extend_from_slice(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_fs3r"))
            .args(&args)
            .env("FS3R_SEED", env)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string()
    };
    assert_eq!(run("100", &[]), "104");
    assert_eq!(run("100", &["--seed", "7"]), "11");
}

#[test]
fn solve_matched_files_recovers_pose() {
    let dir = tempfile::tempdir().unwrap();
    let truth = RigidTransform::from_euler(0.4, -1.1, 2.5, Vec3::new(3.0, -2.0, 0.5));
    let reference = cube_cloud(5, 300);
    let body: Vec<Vec3> = reference.iter().map(|p| truth.apply(*p)).collect();
    let src = write_cloud(dir.path(), "r.ply", &reference);
    let tgt = write_cloud(dir.path(), "b.ply", &body);
    let out = dir.path().join("solve.csv");
    let o = fs3r(&["solve", &src, &tgt, "--solver", "fs3r,eig,svd", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_records_csv(&out).unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        assert!((r.phi - 0.4).abs() < 1e-9 && (r.theta + 1.1).abs() < 1e-9 && (r.psi - 2.5).abs() < 1e-9);
        assert!((r.translation() - truth.translation).norm() < 1e-9);
        assert!(r.loss < 1e-20);
    }
}

#[test]
fn bench_reports_ratio_per_size() {
    for repeat in ["1", "100"] {
        let o = fs3r(&["bench", "--sizes", "100,200", "--repeat", repeat, "--solver", "fs3r,eig"]);
        assert_eq!(code(&o), 0);
        let text = stdout(&o);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,solver,mean_ns,std_ns,samples,ratio_to_eig");
        assert_eq!(lines.len(), 5);
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 6);
            let mean: f64 = f[2].parse().unwrap();
            let std: f64 = f[3].parse().unwrap();
            let ratio: f64 = f[5].parse().unwrap();
            assert!(mean > 0.0 && std >= 0.0 && ratio > 0.0);
            if f[1] == "eig" {
                assert_eq!(ratio, 1.0);
            }
        }
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(stderr.contains("fs3r: log-log slope"), "{stderr}");
    }
}

#[test]
fn icp_identical_clouds_give_identity() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_cloud(dir.path(), "c.ply", &cube_cloud(9, 400));
    let o = fs3r(&["icp", &p, &p, "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = &v[0];
    assert_eq!(r["solver"], "fs3r");
    assert!(r["final_loss"].as_f64().unwrap() < 1e-28);
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((r["rotation"][i][j].as_f64().unwrap() - want).abs() < 1e-14);
        }
        assert!(r["translation"][i].as_f64().unwrap().abs() < 1e-14);
    }
}

#[test]
fn icp_recovers_known_motion_and_solvers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let truth = RigidTransform::from_euler(0.05, -0.03, 0.04, Vec3::new(0.02, -0.01, 0.03));
    let source = cube_cloud(11, 1000);
    let exact: Vec<Vec3> = source.iter().map(|p| truth.apply(*p)).collect();
    let src = write_cloud(dir.path(), "s.ply", &source);
    let tgt = write_cloud(dir.path(), "t.ply", &exact);
    let o = fs3r(&["icp", &src, &tgt, "--solver", "fs3r,svd", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for r in v.as_array().unwrap() {
        for i in 0..3 {
            for j in 0..3 {
                let got = r["rotation"][i][j].as_f64().unwrap();
                assert!((got - truth.rotation.m[i][j]).abs() < 1e-5);
            }
            assert!((r["translation"][i].as_f64().unwrap() - truth.translation[i]).abs() < 1e-5);
        }
    }

    let mut rng = SampleRng::new(12);
    let noisy: Vec<Vec3> = exact
        .iter()
        .map(|p| *p + Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal()) * 0.01)
        .collect();
    let tgt = write_cloud(dir.path(), "n.ply", &noisy);
    let o = fs3r(&["icp", &src, &tgt, "--solver", "fs3r,svd", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (a, b) = (v[0]["final_loss"].as_f64().unwrap(), v[1]["final_loss"].as_f64().unwrap());
    assert!(rel(a, b, 0.0) < 1e-9, "{a} vs {b}");
}

#[test]
fn icp_text_output_lists_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_cloud(dir.path(), "c.ply", &cube_cloud(2, 50));
    let o = fs3r(&["icp", &p, &p]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("solver fs3r\nconverged true after 1 iterations\nrotation\n"), "{text}");
    assert!(text.contains("loss trace\n    1 "));
    assert!(text.contains("wall time "));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["cases", "--solver", "qr"][..],
        &["cases", "--repeat", "0"],
        &["cases", "--xi", "-1"],
        &["cases", "--format", "xml"],
        &["solve"],
        &["solve", "--case", "10"],
        &["bench", "--sizes", "0"],
        &["icp", "only-one.ply"],
        &["frobnicate"],
    ] {
        assert_eq!(code(&fs3r(args)), 2, "{args:?}");
    }
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ply");
    let missing = missing.to_str().unwrap();
    assert_eq!(code(&fs3r(&["icp", missing, missing])), 3);

    let bad = dir.path().join("bad.ply");
    std::fs::write(&bad, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1\n").unwrap();
    let bad = bad.to_str().unwrap();
    let o = fs3r(&["solve", bad, bad]);
    assert_eq!(code(&o), 3);
    assert!(!o.stderr.is_empty());

    let unwritable = dir.path().join("no-such-dir").join("out.csv");
    assert_eq!(code(&fs3r(&["cases", "--out", unwritable.to_str().unwrap()])), 3);
}

#[test]
fn numeric_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let huge = [
        Vec3::new(1e300, 1e300, 0.0),
        Vec3::new(-1e300, 2e300, 1.0),
        Vec3::new(0.0, 1e300, -1e300),
    ];
    let p = write_cloud(dir.path(), "huge.ply", &huge);
    let o = fs3r(&["solve", &p, &p]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver fs3r"));
}

#[test]
fn mismatched_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_cloud(dir.path(), "a.ply", &cube_cloud(1, 10));
    let b = write_cloud(dir.path(), "b.ply", &cube_cloud(1, 11));
    assert_eq!(code(&fs3r(&["solve", &a, &b])), 2);
}
