//! Closed-form least-squares similarity fit (Umeyama 1991).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{check_correspondence, AffineMatrix, PointSet};

/// Fits stop below this ratio of the second to the first singular value of
/// the centered moving covariance.
pub const RANK_TOLERANCE: f64 = 1e-9;

pub const MIN_POINTS: usize = 3;

/// Translation, rotation and uniform scale minimizing the mean squared
/// distance between `fixed` and the transformed `moving` points.
///
/// The rotation is always proper: when the cross-covariance would yield a
/// reflection, the axis of its smallest singular value is flipped.
pub fn umeyama_fit(moving: &PointSet, fixed: &PointSet) -> Result<AffineMatrix> {
    check_correspondence(moving, fixed)?;
    let n = moving.len();
    if n < MIN_POINTS {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least {MIN_POINTS} correspondences, got {n}"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mu_m = moving.centroid().to_vector();
    let mu_f = fixed.centroid().to_vector();

    let mut cov_m = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    let mut var_m = 0.0;
    for (p, q) in moving.iter().zip(fixed.iter()) {
        let x = p.to_vector() - mu_m;
        let y = q.to_vector() - mu_f;
        cov_m += x * x.transpose();
        cross += y * x.transpose();
        var_m += x.norm_squared();
    }
    cov_m *= inv_n;
    cross *= inv_n;
    var_m *= inv_n;

    let mut spread = cov_m.symmetric_eigenvalues().map(f64::abs);
    spread
        .as_mut_slice()
        .sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= RANK_TOLERANCE * spread[0] {
        return Err(Error::DegenerateConfiguration(
            "moving points are collinear or coincident".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let d = svd.singular_values;

    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        sign[d.imin()] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;
    let scale = d.dot(&sign) / var_m;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateConfiguration(format!(
            "fitted scale {scale} is not positive; fixed points may be coincident"
        )));
    }
    let linear = rotation * scale;
    let translation = mu_f - linear * mu_m;
    AffineMatrix::from_parts(linear, translation)
        .map_err(|e| Error::DegenerateConfiguration(e.to_string()))
}
