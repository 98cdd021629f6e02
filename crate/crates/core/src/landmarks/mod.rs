//! Landmark maps: distance transforms, exponential label maps, and landmark
//! recovery from heatmaps and segmentation masks.

mod edt;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point3, Volume3};

/// Decay factor of the label map: `label = exp(−LABEL_DECAY · M / max(M))`.
pub const LABEL_DECAY: f64 = 10.0;

/// A volume whose voxels are all exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask(Volume3);

impl BinaryMask {
    pub fn new(volume: Volume3) -> Result<Self> {
        if let Some(i) = volume.data().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidData(format!(
                "mask voxel {i} has value {} (expected 0 or 1)",
                volume.data()[i]
            )));
        }
        Ok(Self(volume))
    }

    /// Mask with a single feature voxel.
    pub fn single(grid: Grid, voxel: [usize; 3]) -> Result<Self> {
        let [nx, ny, _] = grid.dims;
        let mut data = vec![0.0; grid.dims.iter().product()];
        data[voxel[0] + nx * (voxel[1] + ny * voxel[2])] = 1.0;
        Ok(Self(Volume3::from_grid(grid, data)?))
    }

    pub fn volume(&self) -> &Volume3 {
        &self.0
    }

    pub fn feature_count(&self) -> usize {
        self.0.data().iter().filter(|&&v| v == 1.0).count()
    }
}

impl TryFrom<Volume3> for BinaryMask {
    type Error = Error;

    fn try_from(v: Volume3) -> Result<Self> {
        Self::new(v)
    }
}

/// World-space distance (mm) from each voxel to the nearest feature voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap(Volume3);

impl DistanceMap {
    pub fn volume(&self) -> &Volume3 {
        &self.0
    }

    pub fn into_volume(self) -> Volume3 {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.data().iter().copied().fold(0.0, f64::max)
    }
}

/// Exponentially decaying landmark map, 1 at the landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap(Volume3);

impl LabelMap {
    pub fn volume(&self) -> &Volume3 {
        &self.0
    }

    pub fn into_volume(self) -> Volume3 {
        self.0
    }
}

/// Exact Euclidean distance transform honoring anisotropic spacing.
pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceMap> {
    if mask.feature_count() == 0 {
        return Err(Error::NoFeature);
    }
    let dist = edt::squared_edt(mask.volume())
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(DistanceMap(mask.volume().with_data(dist)?))
}

/// Label map for a single landmark on `grid`.
///
/// The landmark is snapped to its nearest voxel center, which seeds the
/// distance map `M`; the result is `exp(−10·M/max(M))` with `max(M)` taken
/// over the whole volume.
pub fn make_label(landmark: Point3, grid: Grid) -> Result<LabelMap> {
    let probe = Volume3::filled(grid.dims, grid.spacing, grid.origin, 0.0)?;
    if probe.len() == 1 {
        return Err(Error::DegenerateGeometry(
            "a single-voxel volume has zero maximum distance".into(),
        ));
    }
    let voxel = probe.nearest_voxel(&landmark).ok_or(Error::OutOfBounds {
        x: landmark.x,
        y: landmark.y,
        z: landmark.z,
    })?;
    let dist = distance_transform(&BinaryMask::single(grid, voxel)?)?;
    let max = dist.max();
    let label = dist
        .volume()
        .data()
        .iter()
        .map(|m| (-LABEL_DECAY * (m / max)).exp())
        .collect();
    Ok(LabelMap(Volume3::from_grid(grid, label)?))
}

/// World coordinate of the maximum voxel; the lowest linear index wins ties.
pub fn recover_landmark(heatmap: &Volume3) -> Result<Point3> {
    let data = heatmap.data();
    if let Some(i) = data.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidData(format!("heatmap voxel {i} is NaN")));
    }
    let mut best = 0;
    for (i, &v) in data.iter().enumerate().skip(1) {
        if v > data[best] {
            best = i;
        }
    }
    Ok(heatmap.world(best))
}

/// World axis along which extreme points are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis `{other}`"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["x", "y", "z"][self.index()])
    }
}

/// Feature voxels with the smallest and largest world x coordinate
/// (left-most, right-most in the axial view).
pub fn extract_extremes(mask: &BinaryMask) -> Result<(Point3, Point3)> {
    extract_extremes_along(mask, Axis::X)
}

/// Like [`extract_extremes`] along an arbitrary axis. Ties go to the lowest
/// linear index.
pub fn extract_extremes_along(mask: &BinaryMask, axis: Axis) -> Result<(Point3, Point3)> {
    let vol = mask.volume();
    let a = axis.index();
    let mut lo: Option<(usize, usize)> = None;
    let mut hi: Option<(usize, usize)> = None;
    for (i, _) in vol.data().iter().enumerate().filter(|(_, &v)| v == 1.0) {
        let c = vol.coords(i)[a];
        if lo.is_none_or(|(_, best)| c < best) {
            lo = Some((i, c));
        }
        if hi.is_none_or(|(_, best)| c > best) {
            hi = Some((i, c));
        }
    }
    match (lo, hi) {
        (Some((l, _)), Some((h, _))) => Ok((vol.world(l), vol.world(h))),
        _ => Err(Error::NoFeature),
    }
}
