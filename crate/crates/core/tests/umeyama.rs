use lmreg::{apply, compose, decompose, tre, umeyama_fit, AffineMatrix, AffineParams9, Point3, PointSet};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointSet {
    loop {
        let pts: Vec<Point3> = (0..n)
            .map(|_| Point3::new(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)))
            .collect();
        let set = PointSet::new(pts).unwrap();
        if spread_ratio(&set) > 1e-2 {
            return set;
        }
    }
}

fn spread_ratio(set: &PointSet) -> f64 {
    let c = set.centroid();
    let mut cov = Matrix3::zeros();
    for p in set.iter() {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    let mut e: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e[1] / e[0]
}

fn random_similarity(rng: &mut ChaCha8Rng) -> AffineParams9 {
    AffineParams9 {
        t: [0; 3].map(|_| rng.random_range(-20.0..20.0)),
        r: [0; 3].map(|_| rng.random_range(-1.2..1.2)),
        s: [rng.random_range(0.5..2.0); 3],
    }
}

fn mse(m: &AffineMatrix, moving: &PointSet, fixed: &PointSet) -> f64 {
    let d = tre(m, moving, fixed).unwrap();
    d.values.iter().map(|v| v * v).sum::<f64>() / d.values.len() as f64
}

#[test]
fn noise_free_similarities_are_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..300 {
        let n = rng.random_range(3..=20);
        let moving = random_cloud(&mut rng, n);
        let gen = compose(&random_similarity(&mut rng)).unwrap();
        let fixed = apply(&gen, &moving);
        let fit = umeyama_fit(&moving, &fixed).unwrap();
        assert!(fit.max_abs_diff(&gen) < 1e-9, "n = {n}: {}", fit.max_abs_diff(&gen));
        assert!(tre(&fit, &moving, &fixed).unwrap().values.iter().all(|&d| d < 1e-9));
    }
}

#[test]
fn fitted_transform_is_a_local_minimum_of_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..5 {
        let moving = random_cloud(&mut rng, 6);
        let gen = compose(&random_similarity(&mut rng)).unwrap();
        let clean = apply(&gen, &moving);
        let fixed = PointSet::new(
            clean
                .iter()
                .map(|p| Point3::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng), p.z + noise.sample(&mut rng)))
                .collect(),
        )
        .unwrap();
        let fit = umeyama_fit(&moving, &fixed).unwrap();
        let best = mse(&fit, &moving, &fixed);
        let params = decompose(&fit).unwrap();
        let jitter = Normal::new(0.0, 1e-3).unwrap();
        for _ in 0..1000 {
            let ds = jitter.sample(&mut rng);
            let trial = AffineParams9 {
                t: params.t.map(|v| v + jitter.sample(&mut rng)),
                r: params.r.map(|v| v + jitter.sample(&mut rng)),
                s: params.s.map(|v| v + ds),
            };
            let m = compose(&trial).unwrap();
            assert!(mse(&m, &moving, &fixed) >= best * (1.0 - 1e-12));
        }
    }
}

#[test]
fn rotation_is_proper_even_for_mirrored_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mirror = AffineMatrix::from_parts(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0)), Vector3::zeros()).unwrap();
    for _ in 0..100 {
        let n = rng.random_range(3..10);
        let moving = random_cloud(&mut rng, n);
        let fixed = apply(&mirror, &apply(&compose(&random_similarity(&mut rng)).unwrap(), &moving));
        let fit = umeyama_fit(&moving, &fixed).unwrap();
        let lin = fit.linear();
        let c = lin.column(0).norm();
        let r = lin / c;
        assert!((r.determinant() - 1.0).abs() < 1e-9);
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-9);
    }
}

#[test]
fn common_translation_leaves_rotation_and_scale_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let moving = random_cloud(&mut rng, 5);
        let fixed = random_cloud(&mut rng, 5);
        let shift = Vector3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let move_by = |s: &PointSet| {
            PointSet::new(s.iter().map(|p| Point3::new(p.x + shift.x, p.y + shift.y, p.z + shift.z)).collect()).unwrap()
        };
        let a = umeyama_fit(&moving, &fixed).unwrap();
        let b = umeyama_fit(&move_by(&moving), &move_by(&fixed)).unwrap();
        assert!((a.linear() - b.linear()).amax() < 1e-9);
    }
}
