//! Minimal 6-DoF pose/twist/wrench arithmetic.
//!
//! Orientation is a fixed-axis roll-pitch-yaw triple (rotations about the
//! world X, Y, Z axes, applied in that order). Angles are stored wrapped to
//! `(-pi, pi]`. All quantities are plain value types.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

/// Wrap an angle into the half-open interval `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Position + fixed-axis RPY orientation, in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Linear + angular velocity, in m/s and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist6 {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub walpha: f64,
    pub wbeta: f64,
    pub wgamma: f64,
}

/// Force + torque, in newtons and newton-meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench6 {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl Pose6 {
    pub fn new(x: f64, y: f64, z: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            x,
            y,
            z,
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            gamma: wrap_angle(gamma),
        }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.alpha, self.beta, self.gamma]
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Rotation matrix for the fixed-axis RPY triple: `Rz(gamma) * Ry(beta) * Rx(alpha)`.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.alpha, self.beta, self.gamma)
    }

    /// Map a point given in the body frame to the parent frame.
    pub fn transform_point(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Twist6 {
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            vx: v[0],
            vy: v[1],
            vz: v[2],
            walpha: v[3],
            wbeta: v[4],
            wgamma: v[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.vx, self.vy, self.vz, self.walpha, self.wbeta, self.wgamma]
    }

    pub fn linear(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.vz)
    }

    pub fn angular(&self) -> Vector3<f64> {
        Vector3::new(self.walpha, self.wbeta, self.wgamma)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Wrench6 {
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            fx: v[0],
            fy: v[1],
            fz: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn force_norm(&self) -> f64 {
        self.force().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Componentwise `goal - current`, with angular components re-wrapped to `(-pi, pi]`.
pub fn pose_error(goal: &Pose6, current: &Pose6) -> Pose6 {
    Pose6 {
        x: goal.x - current.x,
        y: goal.y - current.y,
        z: goal.z - current.z,
        alpha: wrap_angle(goal.alpha - current.alpha),
        beta: wrap_angle(goal.beta - current.beta),
        gamma: wrap_angle(goal.gamma - current.gamma),
    }
}

/// Concatenate `[pose error, twist, wrench]` into one 18-channel feature frame.
pub fn dense_feature_frame(pose_err: &Pose6, twist: &Twist6, wrench: &Wrench6) -> [f64; 18] {
    let mut out = [0.0; 18];
    out[0..6].copy_from_slice(&pose_err.to_array());
    out[6..12].copy_from_slice(&twist.to_array());
    out[12..18].copy_from_slice(&wrench.to_array());
    out
}

/// Euclidean norms of the three 6-vector blocks: `[|Xe|, |Xdot|, |Fe|]`.
pub fn norm_blocks(pose_err: &Pose6, twist: &Twist6, wrench: &Wrench6) -> [f64; 3] {
    fn norm6(v: [f64; 6]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
    [
        norm6(pose_err.to_array()),
        norm6(twist.to_array()),
        norm6(wrench.to_array()),
    ]
}
