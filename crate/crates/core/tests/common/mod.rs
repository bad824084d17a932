#![allow(dead_code)]

use fs3r::datagen::SampleRng;
use fs3r::geom::{quat_to_rotation, Quaternion, RigidTransform, Vec3};
use fs3r::solver::CorrespondenceSet;

pub fn random_unit_quaternion(rng: &mut SampleRng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.standard_normal(),
            rng.standard_normal(),
            rng.standard_normal(),
            rng.standard_normal(),
        );
        if q.norm() > 1e-3 {
            return q.normalized().unwrap();
        }
    }
}

pub fn random_transform(rng: &mut SampleRng) -> RigidTransform {
    let rotation = quat_to_rotation(random_unit_quaternion(rng)).unwrap();
    let translation = Vec3::new(
        rng.uniform_in(-10.0, 10.0),
        rng.uniform_in(-10.0, 10.0),
        rng.uniform_in(-10.0, 10.0),
    );
    RigidTransform::new(rotation, translation)
}

pub fn random_point(rng: &mut SampleRng) -> Vec3 {
    Vec3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0))
}

/// `b = C r + T + σ·N(0, I)` over `n` points in the unit cube.
pub fn random_instance(rng: &mut SampleRng, n: usize, sigma: f64) -> (CorrespondenceSet, RigidTransform) {
    let truth = random_transform(rng);
    let reference: Vec<Vec3> = (0..n).map(|_| random_point(rng)).collect();
    let body = reference
        .iter()
        .map(|r| {
            truth.apply(*r)
                + Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal()) * sigma
        })
        .collect();
    (CorrespondenceSet::uniform(body, reference).unwrap(), truth)
}

/// Weighted spread of the body points about their centroid.
pub fn body_spread(corr: &CorrespondenceSet) -> f64 {
    let w = corr.normalized_weights();
    let mut c = Vec3::ZERO;
    for (a, b) in w.iter().zip(corr.body()) {
        c += *b * *a;
    }
    w.iter().zip(corr.body()).map(|(a, b)| a * (*b - c).norm_squared()).sum()
}

/// `|a − b|` relative to the larger of the two, floored at machine epsilon
/// times `scale` so that two near-zero losses compare on the data's scale.
pub fn rel_diff(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::EPSILON * scale)
}

pub fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}
