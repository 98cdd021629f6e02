//! Gradient refinement of the nine affine parameters with Adam.
//!
//! The objective is the mean Euclidean distance between fixed landmarks and
//! transformed moving landmarks, with `loss_epsilon` added under each square
//! root so the gradient exists at zero residual.

use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_correspondence, linear_part, rot_x, rot_y, rot_z, AffineParams9, PointSet};

/// Loss trace sampling interval in iterations.
pub const TRACE_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss_epsilon: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            step_size: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss_epsilon: 1e-12,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("refine config: {what}")));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step size must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("betas must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) || !(self.loss_epsilon > 0.0) {
            return bad("epsilons must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    /// Lowest-loss parameters visited.
    pub params: AffineParams9,
    /// `(iteration, loss)` pairs; iteration 0 is the initial parameters.
    pub loss_trace: Vec<(usize, f64)>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Iteration at which `params` was reached.
    pub best_iteration: usize,
}

impl RefineResult {
    /// Writes the trace as CSV with header `iteration,loss`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,loss")?;
        for (it, loss) in &self.loss_trace {
            writeln!(w, "{it},{loss}")?;
        }
        Ok(())
    }
}

/// Mean over correspondences of `sqrt(‖fixed − T(moving)‖² + loss_epsilon)`.
pub fn loss(
    params: &AffineParams9,
    moving: &PointSet,
    fixed: &PointSet,
    loss_epsilon: f64,
) -> Result<f64> {
    check_correspondence(moving, fixed)?;
    Ok(evaluate(params, moving, fixed, loss_epsilon, false).0)
}

/// Analytic gradient of [`loss`] in the order
/// `(tx, ty, tz, rx, ry, rz, sx, sy, sz)`.
pub fn loss_gradient(
    params: &AffineParams9,
    moving: &PointSet,
    fixed: &PointSet,
    loss_epsilon: f64,
) -> Result<[f64; 9]> {
    check_correspondence(moving, fixed)?;
    Ok(evaluate(params, moving, fixed, loss_epsilon, true).1)
}

fn evaluate(
    params: &AffineParams9,
    moving: &PointSet,
    fixed: &PointSet,
    loss_epsilon: f64,
    with_gradient: bool,
) -> (f64, [f64; 9]) {
    let n = moving.len() as f64;
    let linear = linear_part(params);
    let t = Vector3::from(params.t);

    let mut total = 0.0;
    let mut grad = [0.0; 9];
    // Accumulated dL/dq_i·p_iᵀ; every parameter except t enters q = R·S·p + t
    // linearly through this outer product.
    let mut outer = Matrix3::zeros();
    for (p, f) in moving.iter().zip(fixed.iter()) {
        let p = p.to_vector();
        let residual = f.to_vector() - (linear * p + t);
        let d = (residual.norm_squared() + loss_epsilon).sqrt();
        total += d;
        if with_gradient {
            let dq = -residual / (n * d);
            grad[0] += dq.x;
            grad[1] += dq.y;
            grad[2] += dq.z;
            outer += dq * p.transpose();
        }
    }
    if with_gradient {
        let [rx, ry, rz] = params.r;
        let s = Matrix3::from_diagonal(&Vector3::from(params.s));
        let (x, y, z) = (rot_x(rx), rot_y(ry), rot_z(rz));
        let d_rx = z * y * d_rot_x(rx) * s;
        let d_ry = z * d_rot_y(ry) * x * s;
        let d_rz = d_rot_z(rz) * y * x * s;
        grad[3] = d_rx.dot(&outer);
        grad[4] = d_ry.dot(&outer);
        grad[5] = d_rz.dot(&outer);
        let rot = z * y * x;
        for k in 0..3 {
            grad[6 + k] = rot.column(k).dot(&outer.column(k));
        }
    }
    (total / n, grad)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Bias-corrected Adam over a fixed-size parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<const N: usize> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: [f64; N],
    v: [f64; N],
    beta1_t: f64,
    beta2_t: f64,
}

impl<const N: usize> Adam<N> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            m: [0.0; N],
            v: [0.0; N],
            beta1_t: 1.0,
            beta2_t: 1.0,
        }
    }

    pub fn step(&mut self, params: &mut [f64; N], grad: &[f64; N]) {
        self.beta1_t *= self.beta1;
        self.beta2_t *= self.beta2;
        let c1 = 1.0 - self.beta1_t;
        let c2 = 1.0 - self.beta2_t;
        for i in 0..N {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Runs Adam from `init` and returns the best parameters visited.
///
/// The trace holds iteration 0, every [`TRACE_INTERVAL`]-th iteration and the
/// last one, where iteration `k` is the loss after `k` updates.
pub fn refine(
    init: &AffineParams9,
    moving: &PointSet,
    fixed: &PointSet,
    config: &RefineConfig,
) -> Result<RefineResult> {
    config.validate()?;
    init.validate()?;
    check_correspondence(moving, fixed)?;

    let mut adam = Adam::<9>::new(config.step_size, config.beta1, config.beta2, config.epsilon);
    let mut theta = init.to_array();
    let (initial_loss, mut grad) = evaluate(init, moving, fixed, config.loss_epsilon, true);
    if !initial_loss.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            reason: format!("initial loss is {initial_loss}"),
        });
    }
    let mut best = (initial_loss, theta, 0);
    let mut trace = vec![(0, initial_loss)];

    for it in 1..=config.iterations {
        adam.step(&mut theta, &grad);
        let params = AffineParams9::from_array(theta);
        if let Err(e) = params.validate() {
            return Err(Error::Divergence {
                iteration: it,
                reason: e.to_string(),
            });
        }
        let (current, g) = evaluate(&params, moving, fixed, config.loss_epsilon, true);
        if !current.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: it,
                reason: format!("loss is {current}"),
            });
        }
        if current < best.0 {
            best = (current, theta, it);
        }
        if it % TRACE_INTERVAL == 0 || it == config.iterations {
            trace.push((it, current));
        }
        grad = g;
    }

    Ok(RefineResult {
        params: AffineParams9::from_array(best.1),
        loss_trace: trace,
        initial_loss,
        final_loss: best.0,
        best_iteration: best.2,
    })
}
