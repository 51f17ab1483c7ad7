//! Constant-velocity EKF with a polar `(r, θ, ṙ)` measurement model.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub type State = Vector4<f64>;
pub type StateCov = Matrix4<f64>;
pub type MeasVec = Vector3<f64>;
pub type MeasCov = Matrix3<f64>;
pub type MeasJacobian = Matrix3x4<f64>;

/// Ranges at or below this are treated as singular geometry.
pub const MIN_RANGE_M: f64 = 0.01;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

pub fn transition(dt: f64) -> StateCov {
    let mut f = StateCov::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Continuous white-acceleration process noise of intensity `q` over `dt`.
pub fn process_noise(q: f64, dt: f64) -> StateCov {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut m = StateCov::zeros();
    for (p, v) in [(0, 2), (1, 3)] {
        m[(p, p)] = a * q;
        m[(p, v)] = b * q;
        m[(v, p)] = b * q;
        m[(v, v)] = c * q;
    }
    m
}

/// `x' = F x`, `P' = F P Fᵀ + Q`.
pub fn predict(x: &State, p: &StateCov, q: f64, dt: f64) -> (State, StateCov) {
    let f = transition(dt);
    let mut pp = f * p * f.transpose() + process_noise(q, dt);
    symmetrize(&mut pp);
    (f * x, pp)
}

pub fn symmetrize(p: &mut StateCov) {
    let t = p.transpose();
    *p = (*p + t) * 0.5;
}

/// Predicted measurement `(√(x²+y²), atan2(x, y), (x·vx + y·vy)/r)`.
pub fn measure_h(x: &State) -> Result<MeasVec> {
    let r = x[0].hypot(x[1]);
    if r <= MIN_RANGE_M {
        return Err(Error::SingularGeometry(r));
    }
    Ok(MeasVec::new(r, x[0].atan2(x[1]), (x[0] * x[2] + x[1] * x[3]) / r))
}

/// Analytic Jacobian of [`measure_h`].
pub fn measure_jacobian(x: &State) -> Result<MeasJacobian> {
    let (px, py, vx, vy) = (x[0], x[1], x[2], x[3]);
    let r2 = px * px + py * py;
    let r = r2.sqrt();
    if r <= MIN_RANGE_M {
        return Err(Error::SingularGeometry(r));
    }
    let r3 = r2 * r;
    let cross = vx * py - vy * px;
    #[rustfmt::skip]
    let h = MeasJacobian::new(
        px / r,               py / r,                0.0,    0.0,
        py / r2,              -px / r2,              0.0,    0.0,
        py * cross / r3,      -px * cross / r3,      px / r, py / r,
    );
    Ok(h)
}

/// Innovation with the angle component wrapped into (−π, π].
pub fn innovation(z: &MeasVec, predicted: &MeasVec) -> MeasVec {
    let mut v = z - predicted;
    v[1] = wrap_angle(v[1]);
    v
}

/// Linearized measurement prediction for one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub z_pred: MeasVec,
    pub h: MeasJacobian,
    pub s: MeasCov,
    pub s_inv: MeasCov,
    pub s_det: f64,
}

impl Linearization {
    pub fn new(x: &State, p: &StateCov, r: &MeasCov) -> Result<Self> {
        let z_pred = measure_h(x)?;
        let h = measure_jacobian(x)?;
        let mut s = h * p * h.transpose() + r;
        let t = s.transpose();
        s = (s + t) * 0.5;
        let s_det = s.determinant();
        let s_inv = s.try_inverse().ok_or(Error::DegenerateInnovation)?;
        if !(s_det > 0.0) || !s_det.is_finite() {
            return Err(Error::DegenerateInnovation);
        }
        Ok(Self { z_pred, h, s, s_inv, s_det })
    }

    pub fn mahalanobis2(&self, z: &MeasVec) -> f64 {
        let nu = innovation(z, &self.z_pred);
        (nu.transpose() * self.s_inv * nu)[(0, 0)]
    }

    /// Gaussian density N(ν; 0, S).
    pub fn likelihood(&self, z: &MeasVec) -> f64 {
        (-0.5 * self.mahalanobis2(z)).exp() / ((2.0 * PI).powi(3) * self.s_det).sqrt()
    }

    pub fn gain(&self, p: &StateCov) -> nalgebra::Matrix4x3<f64> {
        p * self.h.transpose() * self.s_inv
    }
}

/// Gate test: `(d² ≤ threshold, d²)`.
pub fn gate(lin: &Linearization, z: &MeasVec, threshold: f64) -> (bool, f64) {
    let d2 = lin.mahalanobis2(z);
    (d2 <= threshold, d2)
}

/// JPDA-weighted EKF update. `betas[0]` is the missed-detection weight and
/// `betas[t+1]` pairs with `zs[t]`.
pub fn jpda_update(x: &State, p: &StateCov, lin: &Linearization, zs: &[MeasVec], betas: &[f64]) -> (State, StateCov) {
    let beta0 = betas[0];
    let k = lin.gain(p);
    let mut nu = MeasVec::zeros();
    let mut spread = MeasCov::zeros();
    for (z, &b) in zs.iter().zip(&betas[1..]) {
        if b == 0.0 {
            continue;
        }
        let v = innovation(z, &lin.z_pred);
        nu += b * v;
        spread += b * v * v.transpose();
    }
    spread -= nu * nu.transpose();
    let x_new = x + k * nu;
    let p_c = p - k * lin.s * k.transpose();
    let mut p_new = beta0 * p + (1.0 - beta0) * p_c + k * spread * k.transpose();
    symmetrize(&mut p_new);
    (x_new, p_new)
}
