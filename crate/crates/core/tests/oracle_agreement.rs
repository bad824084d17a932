//! Closed-form solver against the iterative reference solvers.

mod common;

use common::{body_spread, dot4, random_instance, random_point, random_transform, random_unit_quaternion, rel_diff};
use fs3r::datagen::{generate, table1_cases, SampleRng};
use fs3r::geom::{rotation_to_quat, Mat3, Mat4Sym, Quaternion, RigidTransform, Vec3};
use fs3r::oracle::{
    eig_quaternion, eig_rigid_solve, jacobi_eig_sym4, quartic_roots_numeric, svd3, svd_rigid_solve,
};
use fs3r::solver::{
    build_g, build_w, char_coeffs, compute_profile, eigenvector_for, loss, max_eigenvalue, solve,
    CharPoly, CorrespondenceSet, SolverConfig,
};

fn random_mat3(rng: &mut SampleRng, scale: f64) -> Mat3 {
    Mat3::from_rows(std::array::from_fn(|_| std::array::from_fn(|_| scale * rng.uniform_in(-1.0, 1.0))))
}

fn random_sym4(rng: &mut SampleRng) -> Mat4Sym {
    Mat4Sym::from_fn(|_, _| rng.uniform_in(-2.0, 2.0))
}

#[test]
fn jacobi_pairs_are_orthonormal_and_reconstruct() {
    let mut rng = SampleRng::new(21);
    for _ in 0..2000 {
        let w = random_sym4(&mut rng);
        let e = jacobi_eig_sym4(&w).unwrap();
        assert!(e.values.windows(2).all(|p| p[0] >= p[1]));
        let norm = w.inf_norm();
        for k in 0..4 {
            let wv = w.mul_vec(e.vectors[k]);
            let res: f64 = (0..4).map(|i| (wv[i] - e.values[k] * e.vectors[k][i]).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * norm, "residual {res}");
            for j in 0..4 {
                let d = dot4(e.vectors[k], e.vectors[j]);
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let rebuilt: f64 = (0..4).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                assert!((rebuilt - w.get(i, j)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn noise_free_top_eigenvalue_is_reference_spread() {
    // with b = C r + T exactly, H = C Σ aᵢ r̃ᵢ r̃ᵢᵀ and the optimum equals Σ aᵢ ‖r̃ᵢ‖²
    let mut rng = SampleRng::new(22);
    for n in [4, 10, 100] {
        let (corr, _) = random_instance(&mut rng, n, 0.0);
        let p = compute_profile(&corr);
        let mean = corr.reference().iter().fold(Vec3::ZERO, |s, r| s + *r) * (1.0 / n as f64);
        let spread: f64 = corr.reference().iter().map(|r| (*r - mean).norm_squared()).sum::<f64>() / n as f64;
        let top = jacobi_eig_sym4(&build_w(&p.h)).unwrap().values[0];
        assert!((top - spread).abs() < 1e-12 * spread.max(1.0), "{top} vs {spread}");
    }
}

#[test]
fn quartic_roots_match_jacobi_spectrum() {
    let mut rng = SampleRng::new(23);
    for _ in 0..2000 {
        let h = random_mat3(&mut rng, 1.0);
        let w = build_w(&h);
        let cp = char_coeffs(&h, &w);
        let mut roots: Vec<f64> = quartic_roots_numeric(&cp).iter().map(|z| z.re).collect();
        roots.sort_by(|a, b| b.total_cmp(a));
        let eig = jacobi_eig_sym4(&w).unwrap().values;
        let tol = 1e-7 * (1.0 + w.inf_norm());
        for (r, e) in roots.iter().zip(eig) {
            assert!((r - e).abs() <= tol, "{roots:?} vs {eig:?}");
        }
        for z in quartic_roots_numeric(&cp) {
            assert!(z.im.abs() < 1e-7);
            let p = z.powi(4) + z * z * cp.tau1 + z * cp.tau2 + cp.tau3;
            assert!(p.norm() <= 1e-8 * z.norm().powi(4).max(1.0));
        }
    }
}

#[test]
fn vieta_and_determinant_identities() {
    let mut rng = SampleRng::new(24);
    for _ in 0..2000 {
        let h = random_mat3(&mut rng, 1.0);
        let w = build_w(&h);
        let diag = (0..3).map(|i| h[(i, i)].abs()).sum::<f64>();
        assert!(w.trace().abs() <= 8.0 * f64::EPSILON * diag, "trace {}", w.trace());
        let cp = char_coeffs(&h, &w);
        assert!(cp.tau1 <= 0.0);
        let det8 = -8.0 * h.det();
        assert!((cp.tau2 - det8).abs() <= 1e-12 * det8.abs().max(1e-300) + 1e-15);
        assert!((cp.tau3 - w.det()).abs() <= 1e-14);

        let l = jacobi_eig_sym4(&w).unwrap().values;
        let e1: f64 = l.iter().sum();
        let mut e2 = 0.0;
        let mut e3 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                e2 += l[i] * l[j];
                for k in j + 1..4 {
                    e3 += l[i] * l[j] * l[k];
                }
            }
        }
        let e4 = l.iter().product::<f64>();
        let scale = 1.0 + w.inf_norm().powi(4);
        assert!(e1.abs() <= 1e-8 * scale);
        assert!((e2 - cp.tau1).abs() <= 1e-8 * scale);
        assert!((-e3 - cp.tau2).abs() <= 1e-8 * scale);
        assert!((e4 - cp.tau3).abs() <= 1e-8 * scale);
    }
}

#[test]
fn random_full_rank_eigenvalue_and_residual() {
    let mut rng = SampleRng::new(25);
    let cfg = SolverConfig::default();
    for _ in 0..3000 {
        let scale = 10f64.powf(rng.uniform_in(-3.0, 3.0));
        let h = random_mat3(&mut rng, scale);
        let w = build_w(&h);
        let cp = char_coeffs(&h, &w);
        let sol = max_eigenvalue(&cp, &cfg).unwrap();
        let top = jacobi_eig_sym4(&w).unwrap().values[0];
        assert!((sol.lambda_max - top).abs() <= 1e-9 * top, "{} vs {top}", sol.lambda_max);
        assert!(sol.t2 >= 0.0);
        if !sol.degenerate {
            assert!(cp.relative_residual(sol.lambda_max) <= 1e-7 * sol.lambda_max.powi(4).max(1.0));
        }
    }
}

#[test]
fn rank_one_profile_uses_the_limit() {
    let mut rng = SampleRng::new(26);
    for _ in 0..200 {
        let (u, v) = (random_point(&mut rng), random_point(&mut rng));
        let h = Mat3::outer(u, v);
        let w = build_w(&h);
        let cp = char_coeffs(&h, &w);
        let sol = max_eigenvalue(&cp, &SolverConfig::default()).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.lambda_max, (-cp.tau1 / 2.0).sqrt());
        let top = jacobi_eig_sym4(&w).unwrap().values[0];
        assert!((sol.lambda_max - top).abs() <= 1e-6 * top);
    }
}

#[test]
fn degenerate_switchover_is_continuous() {
    // shrink the third axis of the reference cloud toward a plane
    let mut rng = SampleRng::new(27);
    let truth = random_transform(&mut rng);
    let base: Vec<Vec3> = (0..60).map(|_| random_point(&mut rng)).collect();
    let cfg = SolverConfig::default();
    let mut saw = [false; 2];
    let mut last: Option<(f64, bool)> = None;
    for k in 0..=160 {
        let squash = 10f64.powf(-(k as f64) / 10.0);
        let reference: Vec<Vec3> = base.iter().map(|r| Vec3::new(r.x, r.y, r.z * squash)).collect();
        let body = reference.iter().map(|r| truth.apply(*r)).collect();
        let corr = CorrespondenceSet::uniform(body, reference).unwrap();
        let sol = solve(&corr, &cfg).unwrap();
        let top = jacobi_eig_sym4(&build_w(&sol.profile.h)).unwrap().values[0];
        assert!((sol.eigen.lambda_max - top).abs() <= 1e-9 * top);
        saw[sol.eigen.degenerate as usize] = true;
        if let Some((prev, prev_deg)) = last {
            if prev_deg != sol.eigen.degenerate {
                assert!((sol.eigen.lambda_max - prev).abs() <= 1e-5 * prev);
            }
        }
        last = Some((sol.eigen.lambda_max, sol.eigen.degenerate));
    }
    assert_eq!(saw, [true, true], "both branches exercised");
}

#[test]
fn diagonal_g_falls_back_to_identity() {
    let g = Mat4Sym::from_diagonal([3.0, -1.0, -1.0, -1.0]);
    let q = eigenvector_for(&g, 3.0, &SolverConfig::default()).unwrap();
    assert_eq!(q, Quaternion::IDENTITY);
    let gq = g.mul_vec(q.to_array());
    assert_eq!(gq, [3.0, 0.0, 0.0, 0.0]);
}

#[test]
fn eigenvector_of_constructed_spectrum() {
    let mut rng = SampleRng::new(28);
    let cfg = SolverConfig::default();
    for _ in 0..1000 {
        // orthonormal basis from a random rotation's quaternion algebra
        let basis = jacobi_eig_sym4(&random_sym4(&mut rng)).unwrap().vectors;
        let mut lam = [0.0; 4];
        for l in lam.iter_mut() {
            *l = rng.uniform_in(-3.0, 3.0);
        }
        lam[0] = 3.5;
        let g = Mat4Sym::from_fn(|i, j| (0..4).map(|k| lam[k] * basis[k][i] * basis[k][j]).sum());
        let q = eigenvector_for(&g, 3.5, &cfg).unwrap();
        let gq = g.mul_vec(q.to_array());
        let res: f64 = (0..4).map(|i| (gq[i] - 3.5 * q.to_array()[i]).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-9, "residual {res}");
        assert!((dot4(q.to_array(), basis[0]).abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn case_one_quaternion_matches_truth() {
    let inst = generate(&table1_cases()[0]).unwrap();
    let sol = solve(&inst.correspondences, &SolverConfig::default()).unwrap();
    let want = rotation_to_quat(&inst.truth.rotation).unwrap();
    assert!(sol.quaternion.sign_invariant_distance(want) < 1e-9);
    let svd = svd_rigid_solve(&inst.correspondences).unwrap();
    assert!((svd.rotation - sol.transform.rotation).max_abs() < 1e-8);
    assert!((svd.translation - sol.transform.translation).norm() < 1e-8);
}

#[test]
fn planar_case_fits_exactly() {
    let inst = generate(&table1_cases()[1]).unwrap();
    let sol = solve(&inst.correspondences, &SolverConfig::default()).unwrap();
    assert!(sol.transform.is_valid());
    assert!(loss(&inst.correspondences, &sol.transform) < 1e-12);
    assert!((sol.transform.rotation - inst.truth.rotation).frobenius_norm() < 1e-8);
    let t = inst.truth.translation;
    assert!((sol.transform.translation - t).norm() < 1e-6 * t.norm());
}

#[test]
fn closed_form_agrees_with_both_oracles() {
    let mut rng = SampleRng::new(29);
    let cfg = SolverConfig::default();
    for k in 0..3000 {
        let n = 3 + (k % 98);
        let sigma = [0.0, 0.01, 1.0][k % 3];
        let (corr, _) = random_instance(&mut rng, n, sigma);
        let sol = solve(&corr, &cfg).unwrap();
        let g = build_g(&sol.profile.h);
        let eig_q = eig_quaternion(&g).unwrap();
        let eig = jacobi_eig_sym4(&g).unwrap();
        let gap = eig.values[0] - eig.values[1];
        // an isolated top eigenvalue makes the eigenvector and rotation unique
        if gap > 1e-3 * eig.values[0] {
            assert!(sol.quaternion.sign_invariant_distance(eig_q) < 1e-7, "instance {k}");
            let svd = svd_rigid_solve(&corr).unwrap();
            assert!((svd.rotation - sol.transform.rotation).frobenius_norm() < 1e-7, "instance {k}");
        }
        let (lf, ls) = (loss(&corr, &sol.transform), loss(&corr, &svd_rigid_solve(&corr).unwrap()));
        assert!(rel_diff(lf, ls, body_spread(&corr)) <= 1e-9, "instance {k}: {lf} vs {ls}");
        let le = loss(&corr, &eig_rigid_solve(&corr).unwrap());
        assert!(rel_diff(lf, le, body_spread(&corr)) <= 1e-9);
    }
}

#[test]
fn svd_solution_is_proper_for_reflection_prone_data() {
    // a mirrored planar cloud with noise: the best orthogonal fit is a reflection
    let mut rng = SampleRng::new(30);
    for _ in 0..100 {
        let reference: Vec<Vec3> = (0..30).map(|_| Vec3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0), 0.0)).collect();
        let body = reference
            .iter()
            .map(|r| Vec3::new(r.x, r.y, 0.0) + Vec3::new(0.0, 0.0, 0.05 * rng.standard_normal()) + Vec3::new(-r.x * 2.0, 0.0, 0.0))
            .collect();
        let corr = CorrespondenceSet::uniform(body, reference).unwrap();
        let t = svd_rigid_solve(&corr).unwrap();
        assert!(t.rotation.det() > 0.0);
        assert!(t.rotation.is_special_orthogonal(1e-12));
        let f = solve(&corr, &SolverConfig::default()).unwrap();
        assert!(rel_diff(loss(&corr, &t), loss(&corr, &f.transform), body_spread(&corr)) < 1e-9);
    }
}

#[test]
fn svd3_reconstructs() {
    let mut rng = SampleRng::new(31);
    for _ in 0..2000 {
        let a = random_mat3(&mut rng, 5.0);
        let s = svd3(&a).unwrap();
        assert!(s.s[0] >= s.s[1] && s.s[1] >= s.s[2] && s.s[2] >= 0.0);
        assert!((s.reconstruct() - a).max_abs() <= 1e-9 * a.max_abs());
        assert!(s.u.orthogonality_error() < 1e-12 && s.v.orthogonality_error() < 1e-12);
    }
}

#[test]
fn solution_is_a_local_minimum() {
    let inst = generate(&table1_cases()[3]).unwrap();
    let corr = &inst.correspondences;
    let sol = solve(corr, &SolverConfig::default()).unwrap();
    let best = loss(corr, &sol.transform);
    let mut rng = SampleRng::new(32);
    for _ in 0..100 {
        let dq = random_unit_quaternion(&mut rng);
        let small = Quaternion::new(1.0, 1e-3 * dq.q1, 1e-3 * dq.q2, 1e-3 * dq.q3).normalized().unwrap();
        let nudge = RigidTransform::new(
            fs3r::geom::quat_to_rotation(small).unwrap(),
            Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal()) * 1e-3,
        );
        assert!(loss(corr, &nudge.after(&sol.transform)) >= best);
    }
}

#[test]
fn identity_cubic_polynomial_stages() {
    let s = max_eigenvalue(&CharPoly { tau1: -6.0, tau2: -8.0, tau3: -3.0 }, &SolverConfig::default()).unwrap();
    assert_eq!(s.t0, 0.0);
    assert!((s.lambda_max - 3.0).abs() < 1e-14);
    let z = max_eigenvalue(&CharPoly { tau1: 0.0, tau2: 0.0, tau3: 0.0 }, &SolverConfig::default()).unwrap();
    assert!(z.degenerate);
    assert_eq!(z.lambda_max, 0.0);
}
