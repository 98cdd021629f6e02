//! Command-line front end for `lmreg`.
//!
//! `main.rs` only parses arguments and maps [`CliError`] to an exit code;
//! everything else lives here so it can be tested in-process.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lmreg::io::{read_point_set, read_transform, read_volume, write_point_set_to, write_transform, write_volume, TransformRecord};
use lmreg::synth::{generate, read_cohort, write_cohort};
use lmreg::{
    compare_methods, distance_transform, extract_extremes_along, loss, make_label, recover_landmark, tre,
    umeyama_fit, umeyama_refine, Axis, BinaryMask, Error, EvalTarget, Grid, Method, Point3, PointSet,
    RefineConfig, ScaleMode, SynthConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{path}: {source}", path = .path.display())]
    Output { path: PathBuf, source: std::io::Error },
    #[error("writing to stdout: {0}")]
    Stdout(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 2 I/O or format, 3 degenerate data, 4 correspondence
    /// mismatch, 5 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        let e = match self {
            CliError::Lib(e) => e.root(),
            _ => return 2,
        };
        match e {
            Error::Io { .. } | Error::Format { .. } | Error::InvalidParameter(_) => 2,
            Error::NoFeature | Error::OutOfBounds { .. } | Error::DegenerateGeometry(_) | Error::InvalidData(_) => 3,
            Error::Correspondence(_) => 4,
            Error::DegenerateConfiguration(_)
            | Error::Decomposition(_)
            | Error::Divergence { .. }
            | Error::DegenerateTest
            | Error::InsufficientSample { .. } => 5,
            Error::Case { .. } => unreachable!("root() strips case annotations"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lmreg", version, about = "Landmark-based 3D image registration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact Euclidean distance transform of a binary mask volume.
    Edt {
        mask: PathBuf,
        out: PathBuf,
    },
    /// Label map exp(-10 * M / max M) around a single landmark.
    MakeLabel {
        /// Landmark position in mm, `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        landmark: Point3,
        /// Voxel counts, `nx,ny,nz`.
        #[arg(long, value_parser = parse_dims)]
        dims: [usize; 3],
        /// Voxel spacing in mm, `sx,sy,sz`.
        #[arg(long, value_parser = parse_triple, default_value = "1,1,1")]
        spacing: [f64; 3],
        /// World position of voxel (0,0,0) in mm.
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
        origin: [f64; 3],
        out: PathBuf,
    },
    /// Fit a transform mapping MOVING landmarks onto FIXED landmarks.
    Register {
        moving: PathBuf,
        fixed: PathBuf,
        out: PathBuf,
        /// Refine the similarity fit to a nine-parameter affine with Adam.
        #[arg(long)]
        refine: bool,
        #[command(flatten)]
        adam: AdamArgs,
        /// Write the refinement loss trace (`iteration,loss`) here.
        #[arg(long, requires = "refine")]
        trace: Option<PathBuf>,
    },
    /// Target registration error of a stored transform.
    Evaluate {
        transform: PathBuf,
        moving_eval: PathBuf,
        fixed_eval: PathBuf,
    },
    /// Landmark coordinates from a heatmap or a binary mask.
    Extract {
        volume: PathBuf,
        #[arg(long, value_enum, default_value_t = ExtractMode::Landmark)]
        mode: ExtractMode,
        /// Axis along which extremes are taken.
        #[arg(long, value_parser = parse_axis, default_value = "x")]
        axis: Axis,
    },
    /// Generate a seeded synthetic cohort.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        n_cases: usize,
        /// Gaussian noise on fixed landmarks, mm.
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, value_parser = parse_scale_mode, default_value = "uniform")]
        scale_mode: ScaleMode,
        /// Use these generator scales for every case instead of drawing them.
        #[arg(long, value_parser = parse_triple)]
        scales: Option<[f64; 3]>,
        out_dir: PathBuf,
    },
    /// Compare registration methods across a case directory.
    Compare {
        case_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "identity,umeyama,umeyama+refine")]
        methods: Vec<String>,
        /// Landmarks used for the TRE table.
        #[arg(long = "eval", value_parser = parse_target, default_value = "fit")]
        target: EvalTarget,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        adam: AdamArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExtractMode {
    Landmark,
    Extremes,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct AdamArgs {
    /// Adam iterations.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Adam step size.
    #[arg(long, default_value = "1e-5")]
    pub lr: f64,
}

impl AdamArgs {
    fn config(&self) -> RefineConfig {
        RefineConfig {
            iterations: self.iters,
            step_size: self.lr,
            ..RefineConfig::default()
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got `{s}`"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("invalid number `{p}`"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list(s)
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

fn parse_point(s: &str) -> Result<Point3, String> {
    parse_triple(s).map(Point3::from)
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scale_mode(s: &str) -> Result<ScaleMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_target(s: &str) -> Result<EvalTarget, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Output { path: path.clone(), source })
}

pub fn run(command: Command, out: &mut impl Write) -> Result<(), CliError> {
    match command {
        Command::Edt { mask, out: dest } => {
            let mask = BinaryMask::new(read_volume(&mask)?)?;
            write_volume(&dest, distance_transform(&mask)?.volume())?;
        }
        Command::MakeLabel { landmark, dims, spacing, origin, out: dest } => {
            let grid = Grid { dims, spacing, origin: Point3::from(origin) };
            write_volume(&dest, make_label(landmark, grid)?.volume())?;
        }
        Command::Register { moving, fixed, out: dest, refine, adam, trace } => {
            let moving = read_point_set(&moving)?;
            let fixed = read_point_set(&fixed)?;
            let cfg = adam.config();
            if refine {
                let (matrix, result) = umeyama_refine(&moving, &fixed, &cfg)?;
                write_transform(&dest, &TransformRecord { matrix, params: Some(result.params) })?;
                if let Some(path) = trace {
                    let mut w = create(&path)?;
                    result
                        .write_trace(&mut w)
                        .and_then(|_| w.flush())
                        .map_err(|source| CliError::Output { path, source })?;
                }
                writeln!(out, "initial loss: {:.3} mm", result.initial_loss)?;
                writeln!(out, "final loss: {:.3} mm", result.final_loss)?;
            } else {
                let record = TransformRecord::new(umeyama_fit(&moving, &fixed)?);
                write_transform(&dest, &record)?;
                let value = match &record.params {
                    Some(p) => loss(p, &moving, &fixed, cfg.loss_epsilon)?,
                    None => tre(&record.matrix, &moving, &fixed)?.mean,
                };
                writeln!(out, "loss: {value:.3} mm")?;
            }
        }
        Command::Evaluate { transform, moving_eval, fixed_eval } => {
            let record = read_transform(&transform)?;
            let stat = tre(&record.matrix, &read_point_set(&moving_eval)?, &read_point_set(&fixed_eval)?)?;
            writeln!(out, "TRE: {:.3} ± {:.3} mm", stat.mean, stat.std)?;
        }
        Command::Extract { volume, mode, axis } => {
            let vol = read_volume(&volume)?;
            let (points, names) = match mode {
                ExtractMode::Landmark => (vec![recover_landmark(&vol)?], vec!["landmark".to_string()]),
                ExtractMode::Extremes => {
                    let (lo, hi) = extract_extremes_along(&BinaryMask::new(vol)?, axis)?;
                    (vec![lo, hi], vec![format!("{axis}_min"), format!("{axis}_max")])
                }
            };
            let set = PointSet::with_names(points, names)?;
            write_point_set_to(&mut *out, &set)?;
        }
        Command::Synth { seed, n_cases, noise_sigma, scale_mode, scales, out_dir } => {
            let config = SynthConfig {
                n_cases,
                noise_sigma,
                scale_mode,
                fixed_scales: scales,
                ..SynthConfig::default()
            };
            let cases = generate(seed, &config)?;
            write_cohort(&out_dir, seed, &config, &cases)?;
            writeln!(out, "wrote {} cases", cases.len())?;
        }
        Command::Compare { case_dir, methods, target, csv, adam } => {
            let cfg = adam.config();
            let methods = methods
                .iter()
                .map(|m| {
                    m.parse::<Method>().map(|m| match m {
                        Method::UmeyamaRefine(_) => Method::UmeyamaRefine(cfg),
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cases = read_cohort(&case_dir)?;
            let table = compare_methods(&cases, &methods, target)?;
            if let Some(path) = csv {
                std::fs::write(&path, table.to_csv()).map_err(|source| CliError::Output { path, source })?;
            }
            write!(out, "{}", table.to_text())?;
        }
    }
    Ok(())
}
