//! Acceptance criteria 1-9. Runs without the test harness so every criterion
//! prints a PASS/FAIL line; exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lmreg::synth::generate;
use lmreg::{
    apply, compare_methods, compose, decompose, distance_transform, loss, loss_gradient, make_label, paired_ttest,
    recover_landmark, refine, tre, umeyama_fit, AffineParams9, BinaryMask, Error, EvalTarget, Grid, Method, Point3,
    PointSet, RefineConfig, ScaleMode, SynthConfig, Volume3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

/// Nearest feature by exhaustive search over feature voxels.
fn brute_edt(mask: &Volume3) -> Vec<f64> {
    let [nx, ny, nz] = mask.dims();
    let sp = mask.spacing();
    let feats: Vec<[usize; 3]> = (0..mask.len())
        .filter(|&i| mask.data()[i] == 1.0)
        .map(|i| [i % nx, (i / nx) % ny, i / (nx * ny)])
        .collect();
    let mut out = Vec::with_capacity(mask.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let best = feats
                    .iter()
                    .map(|f| {
                        let d = [
                            (x as f64 - f[0] as f64) * sp[0],
                            (y as f64 - f[1] as f64) * sp[1],
                            (z as f64 - f[2] as f64) * sp[2],
                        ];
                        d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                    })
                    .fold(f64::INFINITY, f64::min);
                out.push(best.sqrt());
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut spent = Duration::ZERO;
    let mut worst = 0.0f64;
    for case in 0..200 {
        let dims = [0; 3].map(|_| rng.random_range(1..=16usize));
        let spacing = [0; 3].map(|_| rng.random_range(0.5..=3.0));
        let n = dims.iter().product::<usize>();
        let density = rng.random_range(0.001..0.5);
        let mut data: Vec<f64> = (0..n).map(|_| if rng.random_bool(density) { 1.0 } else { 0.0 }).collect();
        data[rng.random_range(0..n)] = 1.0;
        let vol = Volume3::new(dims, spacing, Point3::ORIGIN, data).unwrap();
        let mask = BinaryMask::new(vol.clone()).unwrap();
        let start = Instant::now();
        let d = distance_transform(&mask).map_err(|e| e.to_string())?;
        spent += start.elapsed();
        let expected = brute_edt(&vol);
        for (got, want) in d.volume().data().iter().zip(&expected) {
            let err = (got - want).abs();
            worst = worst.max(err);
            check(err <= 1e-9, || format!("mask {case} (dims {dims:?}): {got} vs {want}"))?;
        }
    }
    within(spent, Duration::from_secs(30))?;
    Ok(format!("200 masks, max error {worst:.1e} mm, {spent:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let floor = (-10.0f64).exp();
    let start = Instant::now();
    for case in 0..50 {
        let dims = [0; 3].map(|_| rng.random_range(2..=14usize));
        let spacing = [0; 3].map(|_| rng.random_range(0.5..=3.0));
        let origin = Point3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let grid = Grid { dims, spacing, origin };
        let v = [0, 1, 2].map(|k| rng.random_range(0..dims[k]));
        let centre = Point3::new(
            origin.x + v[0] as f64 * spacing[0],
            origin.y + v[1] as f64 * spacing[1],
            origin.z + v[2] as f64 * spacing[2],
        );
        let label = make_label(centre, grid).map_err(|e| e.to_string())?;
        let vol = label.volume();
        let at = vol.index(v[0], v[1], v[2]);
        check(vol.data()[at] == 1.0, || format!("case {case}: value {} at landmark", vol.data()[at]))?;
        for (i, &x) in vol.data().iter().enumerate() {
            check((floor..=1.0).contains(&x), || format!("case {case}: value {x} out of range"))?;
            check(x < 1.0 || i == at, || format!("case {case}: second maximum at {i}"))?;
        }
        let back = recover_landmark(vol).map_err(|e| e.to_string())?;
        check(back == vol.world(at), || format!("case {case}: recovered {back}, expected {}", vol.world(at)))?;
    }
    let spent = start.elapsed();
    within(spent, Duration::from_secs(10))?;
    Ok(format!("50 placements, {spent:.2?}"))
}

fn spread_ok(set: &PointSet) -> bool {
    let c = set.centroid();
    let mut cov = nalgebra::Matrix3::zeros();
    for p in set.iter() {
        let d = nalgebra::Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    let e = cov.symmetric_eigenvalues();
    e.min() > 1e-2 * e.max()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> PointSet {
    PointSet::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)))
            .collect(),
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut spent = Duration::ZERO;
    let mut worst = 0.0f64;
    for case in 0..500 {
        let moving = loop {
            let p = random_points(&mut rng, 4);
            if spread_ok(&p) {
                break p;
            }
        };
        let gen = compose(&AffineParams9 {
            t: [0; 3].map(|_| rng.random_range(-20.0..20.0)),
            r: [0; 3].map(|_| rng.random_range(-PI / 2.0 + 0.1..PI / 2.0 - 0.1)),
            s: [rng.random_range(0.5..=2.0); 3],
        })
        .unwrap();
        let fixed = apply(&gen, &moving);
        let start = Instant::now();
        let fit = umeyama_fit(&moving, &fixed).map_err(|e| e.to_string())?;
        spent += start.elapsed();
        let diff = fit.max_abs_diff(&gen);
        worst = worst.max(diff);
        check(diff <= 1e-9, || format!("case {case}: matrix error {diff:e}"))?;
        let residual = tre(&fit, &moving, &fixed).unwrap();
        check(residual.values.iter().all(|&d| d < 1e-9), || format!("case {case}: residual {:e}", residual.mean))?;
    }
    within(spent, Duration::from_secs(5))?;
    Ok(format!("500 similarities, max element error {worst:.1e}, {spent:.2?}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let h = 1e-6;
    let eps = RefineConfig::default().loss_epsilon;
    let mut worst = 0.0f64;
    let mut compared = 0;
    let start = Instant::now();
    for case in 0..100 {
        let n = rng.random_range(1..=8);
        let moving = random_points(&mut rng, n);
        let fixed = random_points(&mut rng, n);
        let p = AffineParams9 {
            t: [0; 3].map(|_| rng.random_range(-10.0..10.0)),
            r: [0; 3].map(|_| rng.random_range(-1.0..1.0)),
            s: [0; 3].map(|_| rng.random_range(0.5..2.0)),
        };
        let g = loss_gradient(&p, &moving, &fixed, eps).unwrap();
        let base = p.to_array();
        for k in 0..9 {
            let mut hi = base;
            let mut lo = base;
            hi[k] += h;
            lo[k] -= h;
            let f = |a| loss(&AffineParams9::from_array(a), &moving, &fixed, eps).unwrap();
            let fd = (f(hi) - f(lo)) / (2.0 * h);
            if g[k].abs() > 1e-8 {
                let rel = (g[k] - fd).abs() / g[k].abs();
                worst = worst.max(rel);
                compared += 1;
                check(rel < 1e-4, || format!("case {case}, component {k}: {} vs {fd}", g[k]))?;
            }
        }
    }
    let spent = start.elapsed();
    within(spent, Duration::from_secs(5))?;
    Ok(format!("{compared} components, max relative error {worst:.1e}, {spent:.2?}"))
}

fn umeyama_loss(moving: &PointSet, fixed: &PointSet) -> f64 {
    let p = decompose(&umeyama_fit(moving, fixed).unwrap()).unwrap();
    loss(&p, moving, fixed, RefineConfig::default().loss_epsilon).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let axis = SynthConfig {
        n_cases: 10,
        scale_mode: ScaleMode::Nonuniform,
        fixed_scales: Some([1.0, 2.0, 3.0]),
        ..SynthConfig::default()
    };
    let random = SynthConfig { fixed_scales: None, ..axis.clone() };
    let cases: Vec<_> = generate(501, &axis).unwrap().into_iter().chain(generate(502, &random).unwrap()).collect();
    let cfg = RefineConfig::default();
    for (i, c) in cases.iter().enumerate() {
        let init = decompose(&umeyama_fit(&c.moving, &c.fixed).unwrap()).unwrap();
        let r = refine(&init, &c.moving, &c.fixed, &cfg).map_err(|e| e.to_string())?;
        let u = umeyama_loss(&c.moving, &c.fixed);
        check(r.final_loss < u, || format!("case {i}: refined {} vs umeyama {u}", r.final_loss))?;
    }
    let eval: Vec<_> = cases.iter().map(|c| c.to_eval_case().unwrap()).collect();
    let methods = [Method::Identity, Method::Umeyama, Method::UmeyamaRefine(cfg)];
    let table = compare_methods(&eval, &methods, EvalTarget::Fit).map_err(|e| e.to_string())?;
    let m: Vec<f64> = table.rows.iter().map(|r| r.stat.mean).collect();
    check(m[2] < m[1] && m[1] < m[0], || format!("mean TRE identity {:.3}, umeyama {:.3}, refine {:.3}", m[0], m[1], m[2]))?;
    let spent = start.elapsed();
    within(spent, Duration::from_secs(120))?;
    Ok(format!("20 cases, mean TRE identity {:.3} > umeyama {:.3} > refine {:.3} mm, {spent:.2?}", m[0], m[1], m[2]))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cases = generate(601, &SynthConfig { n_cases: 20, ..SynthConfig::default() }).unwrap();
    let cfg = RefineConfig::default();
    let mut worst = 0.0f64;
    for (i, c) in cases.iter().enumerate() {
        let fit = umeyama_fit(&c.moving, &c.fixed).unwrap();
        let r = refine(&decompose(&fit).unwrap(), &c.moving, &c.fixed, &cfg).map_err(|e| e.to_string())?;
        check(r.final_loss <= r.initial_loss, || format!("case {i}: loss rose to {}", r.final_loss))?;
        let refined = compose(&r.params).unwrap();
        for (m, f) in [(&c.moving, &c.fixed), (&c.moving_eval, &c.fixed_eval)] {
            for t in [&fit, &refined] {
                let e = tre(t, m, f).unwrap().values.into_iter().fold(0.0, f64::max);
                worst = worst.max(e);
                check(e < 1e-6, || format!("case {i}: TRE {e:e}"))?;
            }
        }
    }
    let spent = start.elapsed();
    within(spent, Duration::from_secs(60))?;
    Ok(format!("20 cases, worst TRE {worst:.1e} mm, {spent:.2?}"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let config = SynthConfig {
        n_cases: 20,
        noise_sigma: 1.0,
        scale_mode: ScaleMode::Nonuniform,
        ..SynthConfig::default()
    };
    let cases: Vec<_> = generate(701, &config).unwrap().iter().map(|c| c.to_eval_case().unwrap()).collect();
    let methods = [Method::Identity, Method::UmeyamaRefine(RefineConfig::default())];
    let table = compare_methods(&cases, &methods, EvalTarget::Holdout).map_err(|e| e.to_string())?;
    let wins = table.rows[0]
        .stat
        .values
        .iter()
        .zip(&table.rows[1].stat.values)
        .filter(|(id, r)| r < id)
        .count();
    check(wins >= 19, || format!("refined hold-out TRE below identity in only {wins}/20 cases"))?;
    let spent = start.elapsed();
    within(spent, Duration::from_secs(120))?;
    Ok(format!(
        "{wins}/20 cases, hold-out TRE identity {} vs refined {}, {spent:.2?}",
        table.rows[0].stat, table.rows[1].stat
    ))
}

/// Two-sided p-value from the finite trigonometric series for the Student t
/// CDF with integer degrees of freedom.
fn closed_form_p(t: f64, dof: usize) -> f64 {
    let theta = (t.abs() / (dof as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let central = if dof % 2 == 1 {
        let mut sum = 0.0;
        let mut term = c;
        for k in (1..dof - 1).step_by(2) {
            if k > 1 {
                term *= c * c * (k - 1) as f64 / k as f64;
            }
            sum += term;
        }
        2.0 / PI * (theta + s * sum)
    } else {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in (0..dof - 1).step_by(2) {
            if k > 0 {
                term *= c * c * (k - 1) as f64 / k as f64;
            }
            sum += term;
        }
        s * sum
    };
    1.0 - central
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(2..=30);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
        let shift = rng.random_range(-2.0..2.0);
        let b: Vec<f64> = a.iter().map(|x| x + shift + rng.random_range(-1.5..1.5)).collect();
        let got = paired_ttest(&a, &b).map_err(|e| e.to_string())?;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let t = mean / (sd / (n as f64).sqrt());
        let p = closed_form_p(t, n - 1);
        worst = worst.max((got.p - p).abs());
        check((got.p - p).abs() < 1e-8, || format!("pair {case}: p {} vs {p}", got.p))?;
    }
    let same = [1.0, 2.0, 3.0];
    check(matches!(paired_ttest(&same, &same), Err(Error::DegenerateTest)), || "identical samples accepted".into())?;
    check(matches!(paired_ttest(&[1.0], &[2.0]), Err(Error::InsufficientSample { .. })), || "n = 1 accepted".into())?;
    let spent = start.elapsed();
    within(spent, Duration::from_secs(1))?;
    Ok(format!("20 pairs, max p error {worst:.1e}, {spent:.2?}"))
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let bin = env!("CARGO_BIN_EXE_lmreg");
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let o = Command::new(bin).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
        check(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
        Ok(o.stdout)
    };
    let mut outputs = vec![("synth stdout".to_string(), run(&["synth", "--seed", "1", "--scale-mode", "nonuniform", "c"])?)];
    let mut case_dirs: Vec<_> = std::fs::read_dir(dir.join("c"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    case_dirs.sort();
    for case in case_dirs {
        let id = case.file_name().unwrap().to_string_lossy().to_string();
        let c = |f: &str| format!("c/{id}/{f}");
        let (t, tr) = (format!("{id}.json"), format!("{id}_trace.csv"));
        outputs.push((format!("{id} register"), run(&["register", &c("moving.csv"), &c("fixed.csv"), &t, "--refine", "--trace", &tr])?));
        outputs.push((format!("{id} evaluate"), run(&["evaluate", &t, &c("moving_eval.csv"), &c("fixed_eval.csv")])?));
        for f in ["moving.csv", "fixed.csv", "moving_eval.csv", "fixed_eval.csv"] {
            outputs.push((c(f), std::fs::read(dir.join(c(f))).unwrap()));
        }
        outputs.push((t.clone(), std::fs::read(dir.join(&t)).unwrap()));
        outputs.push((tr.clone(), std::fs::read(dir.join(&tr)).unwrap()));
    }
    outputs.push(("manifest".into(), std::fs::read(dir.join("c/manifest.json")).unwrap()));
    Ok(outputs)
}

fn criterion_9() -> Outcome {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    check(first.len() == second.len(), || "different number of outputs".into())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        check(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} outputs byte-identical across two runs", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("EDT exactness", criterion_1),
        ("label map fidelity", criterion_2),
        ("Umeyama exact recovery", criterion_3),
        ("gradient correctness", criterion_4),
        ("non-uniform advantage", criterion_5),
        ("uniform non-regression", criterion_6),
        ("hold-out generalization", criterion_7),
        ("paired t-test", criterion_8),
        ("end-to-end determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
