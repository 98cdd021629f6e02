//! Seeded synthetic landmark cohorts and their directory layout.
//!
//! A cohort directory holds `manifest.json` and one sub-directory per case
//! containing `moving.csv`, `fixed.csv` and optionally `moving_eval.csv` and
//! `fixed_eval.csv`.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalCase;
use crate::geometry::{apply, compose, AffineParams9, Point3, PointSet};
use crate::io::{read_point_set, write_point_set};

const FIT_NAMES: [&str; 4] = ["left_extreme", "right_extreme", "bladder_neck", "urethra_exit"];

/// Minimum ratio of the smallest to the largest spread of a fit cloud.
const MIN_SPREAD_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    /// One scale factor shared by all axes.
    Uniform,
    /// An independent factor per axis.
    Nonuniform,
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ScaleMode::Uniform),
            "nonuniform" | "non-uniform" => Ok(ScaleMode::Nonuniform),
            other => Err(Error::InvalidParameter(format!("unknown scale mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_cases: usize,
    pub noise_sigma: f64,
    pub scale_mode: ScaleMode,
    /// Translations are drawn from `[-t, t]` mm per axis.
    pub translation_range: f64,
    /// Euler angles are drawn from `[-r, r]` rad.
    pub rotation_range: f64,
    pub scale_range: (f64, f64),
    /// Overrides the drawn scales when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_scales: Option<[f64; 3]>,
    pub n_fit: usize,
    pub n_holdout: usize,
    /// Edge length of the cube (centered at the origin) landmarks are drawn in.
    pub box_mm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_cases: 5,
            noise_sigma: 0.0,
            scale_mode: ScaleMode::Uniform,
            translation_range: 10.0,
            rotation_range: 0.3,
            scale_range: (0.8, 1.25),
            fixed_scales: None,
            n_fit: 4,
            n_holdout: 1,
            box_mm: 50.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synthetic config: {m}")));
        if self.n_cases == 0 {
            return bad("n_cases must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("scale range must be positive and ordered");
        }
        if let Some(s) = self.fixed_scales {
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("fixed scales must be positive");
            }
        }
        if self.n_fit < 3 {
            return bad("at least three fitting landmarks are required");
        }
        if !(self.box_mm > 0.0) || !(self.translation_range >= 0.0) || !(self.rotation_range >= 0.0) {
            return bad("ranges must be non-negative and the box positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub id: String,
    pub moving: PointSet,
    pub fixed: PointSet,
    pub moving_eval: PointSet,
    pub fixed_eval: PointSet,
    pub generator: AffineParams9,
    pub noise_sigma: f64,
    pub seed: u64,
    /// ChaCha stream the case was drawn from.
    pub stream: u64,
}

impl SyntheticCase {
    pub fn to_eval_case(&self) -> Result<EvalCase> {
        EvalCase::new(
            self.id.clone(),
            self.moving.clone(),
            self.fixed.clone(),
            Some((self.moving_eval.clone(), self.fixed_eval.clone())),
        )
    }
}

/// Draws `config.n_cases` cases. Case `i` uses stream `i` of a ChaCha8
/// generator keyed by `seed`, so each case is reproducible on its own.
pub fn generate(seed: u64, config: &SynthConfig) -> Result<Vec<SyntheticCase>> {
    config.validate()?;
    (0..config.n_cases as u64)
        .map(|i| generate_case(seed, i, config))
        .collect()
}

fn generate_case(seed: u64, stream: u64, config: &SynthConfig) -> Result<SyntheticCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let tr = config.translation_range;
    let rr = config.rotation_range;
    let t = [0; 3].map(|_| rng.random_range(-tr..=tr));
    let r = [0; 3].map(|_| rng.random_range(-rr..=rr));
    let (lo, hi) = config.scale_range;
    let s = match config.scale_mode {
        ScaleMode::Uniform => [rng.random_range(lo..=hi); 3],
        ScaleMode::Nonuniform => [0; 3].map(|_| rng.random_range(lo..=hi)),
    };
    let generator = AffineParams9 {
        t,
        r,
        s: config.fixed_scales.unwrap_or(s),
    };
    let transform = compose(&generator)?;

    let half = 0.5 * config.box_mm;
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.random_range(-half..=half), rng.random_range(-half..=half), rng.random_range(-half..=half)))
            .collect()
    };
    let fit_points = loop {
        let pts = draw(&mut rng, config.n_fit);
        if well_spread(&pts) {
            break pts;
        }
    };
    let holdout_points = draw(&mut rng, config.n_holdout);

    let fit_names = (0..config.n_fit)
        .map(|i| FIT_NAMES.get(i).map_or_else(|| format!("landmark_{i}"), |s| s.to_string()))
        .collect::<Vec<_>>();
    let holdout_names = (0..config.n_holdout)
        .map(|i| if config.n_holdout == 1 { "cyst_center".to_string() } else { format!("cyst_center_{i}") })
        .collect::<Vec<_>>();

    let moving = PointSet::with_names(fit_points, fit_names)?;
    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let fixed = perturb(&apply(&transform, &moving), &noise, &mut rng)?;

    let (moving_eval, fixed_eval) = if config.n_holdout > 0 {
        let m = PointSet::with_names(holdout_points, holdout_names)?;
        let f = perturb(&apply(&transform, &m), &noise, &mut rng)?;
        (m, f)
    } else {
        (moving.clone(), fixed.clone())
    };

    Ok(SyntheticCase {
        id: format!("case_{stream:03}"),
        moving,
        fixed,
        moving_eval,
        fixed_eval,
        generator,
        noise_sigma: config.noise_sigma,
        seed,
        stream,
    })
}

fn well_spread(points: &[Point3]) -> bool {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.to_vector()) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| {
        let d = p.to_vector() - mean;
        a + d * d.transpose()
    }) / n;
    let eig = cov.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    hi > 0.0 && lo >= MIN_SPREAD_RATIO * hi
}

fn perturb(pts: &PointSet, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Result<PointSet> {
    if noise.std_dev() == 0.0 {
        return Ok(pts.clone());
    }
    let moved = pts
        .iter()
        .map(|p| Point3::new(p.x + noise.sample(rng), p.y + noise.sample(rng), p.z + noise.sample(rng)))
        .collect();
    match pts.names() {
        Some(names) => PointSet::with_names(moved, names.to_vec()),
        None => PointSet::new(moved),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: SynthConfig,
    pub cases: Vec<ManifestCase>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestCase {
    pub id: String,
    pub stream: u64,
    pub generator: AffineParams9,
}

/// Writes the cohort under `dir`, creating it if needed.
pub fn write_cohort(dir: impl AsRef<Path>, seed: u64, config: &SynthConfig, cases: &[SyntheticCase]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for case in cases {
        let sub = dir.join(&case.id);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        write_point_set(sub.join("moving.csv"), &case.moving)?;
        write_point_set(sub.join("fixed.csv"), &case.fixed)?;
        write_point_set(sub.join("moving_eval.csv"), &case.moving_eval)?;
        write_point_set(sub.join("fixed_eval.csv"), &case.fixed_eval)?;
    }
    let manifest = Manifest {
        seed,
        config: config.clone(),
        cases: cases
            .iter()
            .map(|c| ManifestCase {
                id: c.id.clone(),
                stream: c.stream,
                generator: c.generator,
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Loads every case sub-directory of `dir` that holds `moving.csv` and
/// `fixed.csv`, in lexicographic order of directory name.
pub fn read_cohort(dir: impl AsRef<Path>) -> Result<Vec<EvalCase>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subdirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("moving.csv").is_file() && path.join("fixed.csv").is_file() {
            subdirs.push(path);
        }
    }
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::format(dir, "no case directories with moving.csv and fixed.csv"));
    }
    subdirs
        .iter()
        .map(|sub| {
            let id = sub.file_name().expect("dir entry").to_string_lossy().into_owned();
            let moving = read_point_set(sub.join("moving.csv"))?;
            let fixed = read_point_set(sub.join("fixed.csv"))?;
            let (me, fe) = (sub.join("moving_eval.csv"), sub.join("fixed_eval.csv"));
            let holdout = if me.is_file() && fe.is_file() {
                Some((read_point_set(me)?, read_point_set(fe)?))
            } else {
                None
            };
            EvalCase::new(id.clone(), moving, fixed, holdout).map_err(|e| Error::Case {
                case: id,
                source: Box::new(e),
            })
        })
        .collect()
}
