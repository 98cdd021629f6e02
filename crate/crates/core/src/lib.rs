//! Landmark-guided registration of 3D images.
//!
//! Landmarks are recovered from distance-map heatmaps or segmentation masks,
//! aligned in closed form with a similarity transform, refined to a
//! nine-parameter affine (translation, rotation, per-axis scale) by Adam,
//! and scored with target registration error.
//!
//! ```
//! use lmreg::{apply, compose, decompose, refine, umeyama_fit, AffineParams9, Point3, PointSet, RefineConfig};
//!
//! let moving = PointSet::new(vec![
//!     Point3::new(0.0, 0.0, 0.0),
//!     Point3::new(10.0, 0.0, 0.0),
//!     Point3::new(0.0, 10.0, 0.0),
//!     Point3::new(0.0, 0.0, 10.0),
//! ])?;
//! let truth = AffineParams9 { t: [1.0, 2.0, 3.0], r: [0.0, 0.0, 0.1], s: [1.0, 1.1, 1.2] };
//! let fixed = apply(&compose(&truth)?, &moving);
//!
//! let init = decompose(&umeyama_fit(&moving, &fixed)?)?;
//! let refined = refine(&init, &moving, &fixed, &RefineConfig::default())?;
//! assert!(refined.final_loss < refined.initial_loss);
//! # Ok::<(), lmreg::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod landmarks;
pub mod refine;
pub mod stats;
pub mod synth;
pub mod umeyama;

pub use error::{Error, Result};
pub use eval::{
    compare_methods, paired_ttest, tre, umeyama_refine, ComparisonTable, EvalCase, EvalTarget, Method,
    Registrar, RegistrationReport, TTest, TreStat,
};
pub use geometry::{apply, compose, decompose, AffineMatrix, AffineParams9, Grid, Point3, PointSet, Volume3};
pub use landmarks::{
    distance_transform, extract_extremes, extract_extremes_along, make_label, recover_landmark, Axis,
    BinaryMask, DistanceMap, LabelMap,
};
pub use refine::{loss, loss_gradient, refine, RefineConfig, RefineResult};
pub use synth::{ScaleMode, SynthConfig, SyntheticCase};
pub use umeyama::umeyama_fit;
