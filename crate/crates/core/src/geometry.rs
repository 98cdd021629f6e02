//! Points, volumes and the nine-parameter affine family.
//!
//! A transform maps a moving point `p` to `R·S·p + t`, where `S` is the
//! diagonal scale matrix and `R = Rz(rz)·Ry(ry)·Rx(rx)` is built from
//! intrinsic Z-Y-X Euler angles. Shear is not representable.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest off-diagonal entry of `RᵀR − I` tolerated by [`decompose`].
pub const SHEAR_TOLERANCE: f64 = 1e-6;

/// `|sin(ry)|` at or above this is treated as gimbal lock.
const GIMBAL_LIMIT: f64 = 1.0 - 1e-12;

/// A world-space point in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub(crate) fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub(crate) fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.x, self.y, self.z)
    }
}

/// An ordered set of landmarks. Index `i` of a moving set corresponds to
/// index `i` of the fixed set it is registered against.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point3>,
    names: Option<Vec<String>>,
}

impl PointSet {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        Self::build(points, None)
    }

    pub fn with_names(points: Vec<Point3>, names: Vec<String>) -> Result<Self> {
        if names.len() != points.len() {
            return Err(Error::InvalidData(format!(
                "{} names for {} points",
                names.len(),
                points.len()
            )));
        }
        Self::build(points, Some(names))
    }

    fn build(points: Vec<Point3>, names: Option<Vec<String>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidData("point set is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidData(format!("point {i} is not finite")));
        }
        Ok(Self { points, names })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; a point set holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point3> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len() as f64;
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.to_vector());
        Point3::from_vector(&(sum / n))
    }

    /// Same names, new coordinates.
    pub(crate) fn with_points(&self, points: Vec<Point3>) -> Result<Self> {
        Self::build(points, self.names.clone())
    }
}

/// Checks that two sets can be paired index by index.
pub fn check_correspondence(moving: &PointSet, fixed: &PointSet) -> Result<()> {
    if moving.len() != fixed.len() {
        return Err(Error::Correspondence(format!(
            "moving set has {} points, fixed set has {}",
            moving.len(),
            fixed.len()
        )));
    }
    if let (Some(a), Some(b)) = (moving.names(), fixed.names()) {
        if let Some(i) = a.iter().zip(b).position(|(x, y)| x != y) {
            return Err(Error::Correspondence(format!(
                "row {i}: moving landmark '{}' paired with fixed landmark '{}'",
                a[i], b[i]
            )));
        }
    }
    Ok(())
}

/// Voxel geometry shared by volumes: dimensions, spacing and origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: Point3,
}

/// A scalar grid with anisotropic voxel spacing.
///
/// Voxels are stored with x fastest: `index = x + nx·(y + ny·z)`. The world
/// position of voxel `(x, y, z)` is `origin + (x·sx, y·sy, z·sz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3 {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: Point3,
    data: Vec<f64>,
}

impl Volume3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: Point3, data: Vec<f64>) -> Result<Self> {
        Self::check_geometry(dims, spacing, origin)?;
        let n = dims.iter().product::<usize>();
        if data.len() != n {
            return Err(Error::InvalidData(format!(
                "volume {}x{}x{} needs {n} values, got {}",
                dims[0],
                dims[1],
                dims[2],
                data.len()
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], origin: Point3, value: f64) -> Result<Self> {
        Self::check_geometry(dims, spacing, origin)?;
        let n = dims.iter().product();
        Self::new(dims, spacing, origin, vec![value; n])
    }

    fn check_geometry(dims: [usize; 3], spacing: [f64; 3], origin: Point3) -> Result<()> {
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidParameter("origin is not finite".into()));
        }
        Ok(())
    }

    pub fn from_grid(grid: Grid, data: Vec<f64>) -> Result<Self> {
        Self::new(grid.dims, grid.spacing, grid.origin, data)
    }

    pub fn grid(&self) -> Grid {
        Grid {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    pub fn world(&self, index: usize) -> Point3 {
        let [x, y, z] = self.coords(index);
        Point3::new(
            self.origin.x + x as f64 * self.spacing[0],
            self.origin.y + y as f64 * self.spacing[1],
            self.origin.z + z as f64 * self.spacing[2],
        )
    }

    /// Voxel whose center is nearest `p`, or `None` when `p` lies outside the
    /// half-voxel-padded grid extent.
    pub fn nearest_voxel(&self, p: &Point3) -> Option<[usize; 3]> {
        let rel = [
            (p.x - self.origin.x) / self.spacing[0],
            (p.y - self.origin.y) / self.spacing[1],
            (p.z - self.origin.z) / self.spacing[2],
        ];
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let r = rel[axis].round();
            if !r.is_finite() || r < 0.0 || r >= self.dims[axis] as f64 {
                return None;
            }
            out[axis] = r as usize;
        }
        Some(out)
    }

    /// A volume with this geometry and new voxel values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.origin, data)
    }
}

/// Translation, Euler rotation and per-axis scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams9 {
    /// Translation in millimeters.
    pub t: [f64; 3],
    /// Rotation about x, y, z in radians, composed as `Rz·Ry·Rx`.
    pub r: [f64; 3],
    /// Positive scale along each moving-image axis.
    pub s: [f64; 3],
}

impl Default for AffineParams9 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineParams9 {
    pub const IDENTITY: AffineParams9 = AffineParams9 {
        t: [0.0; 3],
        r: [0.0; 3],
        s: [1.0; 3],
    };

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameters {self:?}")));
        }
        if self.s.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scales must be positive, got {:?}",
                self.s
            )));
        }
        Ok(())
    }

    /// Flat layout `(tx, ty, tz, rx, ry, rz, sx, sy, sz)`.
    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.t);
        out[3..6].copy_from_slice(&self.r);
        out[6..].copy_from_slice(&self.s);
        out
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            t: [a[0], a[1], a[2]],
            r: [a[3], a[4], a[5]],
            s: [a[6], a[7], a[8]],
        }
    }
}

pub(crate) fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub(crate) fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub(crate) fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rz(rz)·Ry(ry)·Rx(rx)`.
pub fn rotation_matrix(r: [f64; 3]) -> Matrix3<f64> {
    rot_z(r[2]) * rot_y(r[1]) * rot_x(r[0])
}

/// Linear part `R·S` without validating the parameters.
pub(crate) fn linear_part(params: &AffineParams9) -> Matrix3<f64> {
    rotation_matrix(params.r) * Matrix3::from_diagonal(&Vector3::from(params.s))
}

/// A 4×4 homogeneous transform with bottom row `(0, 0, 0, 1)` and an
/// invertible linear block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix(Matrix4<f64>);

impl AffineMatrix {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_parts(linear: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&linear);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidParameter(format!(
                "bottom row must be (0, 0, 0, 1), got {bottom:?}"
            )));
        }
        let det = m.fixed_view::<3, 3>(0, 0).determinant();
        if det == 0.0 {
            return Err(Error::InvalidParameter("linear part is singular".into()));
        }
        Ok(Self(m))
    }

    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::InvalidParameter(format!(
                "expected 16 matrix entries, got {}",
                values.len()
            )));
        }
        Self::from_matrix(Matrix4::from_row_slice(values))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn linear(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from_vector(&(self.linear() * p.to_vector() + self.translation()))
    }

    /// Largest element-wise absolute difference.
    pub fn max_abs_diff(&self, other: &AffineMatrix) -> f64 {
        (self.0 - other.0).amax()
    }
}

/// Builds the homogeneous matrix for `params`.
pub fn compose(params: &AffineParams9) -> Result<AffineMatrix> {
    params.validate()?;
    AffineMatrix::from_parts(linear_part(params), Vector3::from(params.t))
}

/// Splits `matrix` into translation, Z-Y-X Euler angles and per-axis scale.
///
/// Scales are the column norms of the linear block. Reflections, shear above
/// [`SHEAR_TOLERANCE`] and the gimbal-lock configuration `|ry| = π/2` are
/// rejected.
pub fn decompose(matrix: &AffineMatrix) -> Result<AffineParams9> {
    let linear = matrix.linear();
    if linear.determinant() <= 0.0 {
        return Err(Error::Decomposition(
            "linear part has a reflection (negative determinant)".into(),
        ));
    }
    let s = [
        linear.column(0).norm(),
        linear.column(1).norm(),
        linear.column(2).norm(),
    ];
    let rot = linear * Matrix3::from_diagonal(&Vector3::new(1.0 / s[0], 1.0 / s[1], 1.0 / s[2]));

    let gram = rot.transpose() * rot;
    let mut residue = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                residue = residue.max(gram[(i, j)].abs());
            }
        }
    }
    if residue > SHEAR_TOLERANCE {
        return Err(Error::Decomposition(format!(
            "shear residue {residue:.3e} exceeds {SHEAR_TOLERANCE:e}"
        )));
    }

    let sin_y = -rot[(2, 0)];
    if sin_y.abs() >= GIMBAL_LIMIT {
        return Err(Error::Decomposition(
            "rotation about y is ±π/2 (gimbal lock)".into(),
        ));
    }
    let ry = sin_y.asin();
    let rx = rot[(2, 1)].atan2(rot[(2, 2)]);
    let rz = rot[(1, 0)].atan2(rot[(0, 0)]);
    let t = matrix.translation();

    Ok(AffineParams9 {
        t: [t.x, t.y, t.z],
        r: [rx, ry, rz],
        s,
    })
}

/// Maps every point through `matrix`, keeping order and names.
pub fn apply(matrix: &AffineMatrix, pts: &PointSet) -> PointSet {
    let moved = pts.iter().map(|p| matrix.transform_point(p)).collect();
    pts.with_points(moved)
        .expect("affine image of finite points is finite")
}
