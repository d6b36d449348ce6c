//! Hybrid force-motion control law and residual command composition.
//!
//! Per axis, a diagonal selection matrix blends a PD motion subsystem against
//! a PI force subsystem:
//!
//! ```text
//! u = (I - S) (Kp_x Xe + Kd_x Xdot) + S (Kp_f Fe + Ki_f integral(Fe))
//! ```
//!
//! The damping and integral gains are derived from the proportional gains as
//! `Kd_x = 2 sqrt(Kp_x)` and `Ki_f = 0.01 Kp_f`. A learned residual command
//! is added on top of the nominal command and the sum is saturated.

use crate::se3::{Pose6, Twist6, Wrench6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("negative gain at axis {axis}: {value}")]
    NegativeGain { axis: usize, value: f64 },
    #[error("selection matrix entry at axis {axis} outside [0, 1]: {value}")]
    SelectionOutOfRange { axis: usize, value: f64 },
}

/// Diagonal of the 6x6 axis selection matrix; 0 selects motion, 1 selects force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    sigma: [f64; 6],
}

impl SelectionMatrix {
    /// Entries must lie in `[0, 1]`; values may be continuous blends.
    pub fn new(sigma: [f64; 6]) -> Result<Self, ControlError> {
        for (axis, &value) in sigma.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ControlError::SelectionOutOfRange { axis, value });
            }
        }
        Ok(Self { sigma })
    }

    pub fn motion_only() -> Self {
        Self { sigma: [0.0; 6] }
    }

    pub fn force_only() -> Self {
        Self { sigma: [1.0; 6] }
    }

    pub fn sigma(&self) -> [f64; 6] {
        self.sigma
    }
}

/// The four controller gain diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub kp_x: [f64; 6],
    pub kd_x: [f64; 6],
    pub kp_f: [f64; 6],
    pub ki_f: [f64; 6],
}

/// Build a gain set from the proportional gains: `kd_x = 2 sqrt(kp_x)`,
/// `ki_f = 0.01 kp_f`, elementwise.
pub fn derive_gains(kp_x: [f64; 6], kp_f: [f64; 6]) -> Result<GainSet, ControlError> {
    for (axis, &value) in kp_x.iter().chain(kp_f.iter()).enumerate() {
        if value < 0.0 {
            return Err(ControlError::NegativeGain { axis: axis % 6, value });
        }
    }
    let mut kd_x = [0.0; 6];
    let mut ki_f = [0.0; 6];
    for i in 0..6 {
        kd_x[i] = 2.0 * kp_x[i].sqrt();
        ki_f[i] = 0.01 * kp_f[i];
    }
    Ok(GainSet { kp_x, kd_x, kp_f, ki_f })
}

/// Clamped accumulator for the force-error integral term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceIntegral {
    accum: Wrench6,
    clamp: [f64; 6],
}

impl ForceIntegral {
    /// `clamp` entries are per-axis anti-windup bounds (absolute values).
    pub fn new(clamp: [f64; 6]) -> Self {
        Self { accum: Wrench6::default(), clamp }
    }

    pub fn accum(&self) -> Wrench6 {
        self.accum
    }
}

/// Rectangle-rule accumulation `accum += Fe * dt`, clamped per axis.
pub fn update_integral(integ: &ForceIntegral, force_err: &Wrench6, dt: f64) -> ForceIntegral {
    let mut accum = integ.accum.to_array();
    let fe = force_err.to_array();
    for i in 0..6 {
        accum[i] = (accum[i] + fe[i] * dt).clamp(-integ.clamp[i], integ.clamp[i]);
    }
    ForceIntegral {
        accum: Wrench6::from_array(accum),
        clamp: integ.clamp,
    }
}

/// A 6-axis Cartesian command, interpreted downstream as a twist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub u: [f64; 6],
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_twist(&self) -> Twist6 {
        Twist6::from_array(self.u)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite())
    }
}

/// Per-axis symmetric saturation limits for executed commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandBounds {
    pub linear: f64,
    pub angular: f64,
}

impl CommandBounds {
    pub fn limit(&self, axis: usize) -> f64 {
        if axis < 3 {
            self.linear
        } else {
            self.angular
        }
    }
}

/// The nominal hybrid law. `pose_err` and `twist_err` feed the motion branch,
/// `force_err` and the integral feed the force branch, blended per axis by the
/// selection matrix.
pub fn nominal_command(
    pose_err: &Pose6,
    twist_err: &Twist6,
    force_err: &Wrench6,
    integ: &ForceIntegral,
    sigma: &SelectionMatrix,
    gains: &GainSet,
) -> ControlCommand {
    let xe = pose_err.to_array();
    let xd = twist_err.to_array();
    let fe = force_err.to_array();
    let fi = integ.accum.to_array();
    let s = sigma.sigma();
    let mut u = [0.0; 6];
    for i in 0..6 {
        let motion = gains.kp_x[i] * xe[i] + gains.kd_x[i] * xd[i];
        let force = gains.kp_f[i] * fe[i] + gains.ki_f[i] * fi[i];
        u[i] = (1.0 - s[i]) * motion + s[i] * force;
    }
    ControlCommand { u }
}

/// Contribution of a residual goal offset through the motion branch:
/// `(I - S) Kp_x * offset`.
pub fn residual_command(
    goal_offset: &Pose6,
    sigma: &SelectionMatrix,
    gains: &GainSet,
) -> ControlCommand {
    let xa = goal_offset.to_array();
    let s = sigma.sigma();
    let mut u = [0.0; 6];
    for i in 0..6 {
        u[i] = (1.0 - s[i]) * gains.kp_x[i] * xa[i];
    }
    ControlCommand { u }
}

/// Clamp a command to the per-axis saturation limits.
pub fn saturate(cmd: &ControlCommand, bounds: &CommandBounds) -> ControlCommand {
    let mut u = [0.0; 6];
    for i in 0..6 {
        let lim = bounds.limit(i);
        u[i] = cmd.u[i].clamp(-lim, lim);
    }
    ControlCommand { u }
}

/// Elementwise sum of nominal and residual commands, saturated per axis.
pub fn compose(
    u_nom: &ControlCommand,
    u_rl: &ControlCommand,
    bounds: &CommandBounds,
) -> ControlCommand {
    let mut u = [0.0; 6];
    for i in 0..6 {
        u[i] = u_nom.u[i] + u_rl.u[i];
    }
    saturate(&ControlCommand { u }, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bounds() -> CommandBounds {
        CommandBounds { linear: 2.0, angular: 2.0 }
    }

    #[test]
    fn derive_gains_relations() {
        let g = derive_gains([100.0; 6], [10.0; 6]).unwrap();
        assert_eq!(g.kd_x, [20.0; 6]);
        assert_eq!(g.ki_f, [0.1; 6]);

        let g = derive_gains([0.0; 6], [0.0; 6]).unwrap();
        assert_eq!(g.kd_x, [0.0; 6]);

        let g = derive_gains([1.0, 4.0, 9.0, 16.0, 25.0, 36.0], [0.0; 6]).unwrap();
        assert_eq!(g.kd_x, [2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn derive_gains_rejects_negative() {
        let mut kp = [1.0; 6];
        kp[3] = -0.5;
        assert!(matches!(
            derive_gains(kp, [1.0; 6]),
            Err(ControlError::NegativeGain { axis: 3, .. })
        ));
    }

    #[test]
    fn selection_matrix_range_check() {
        assert!(SelectionMatrix::new([0.0, 0.5, 1.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(SelectionMatrix::new([1.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(SelectionMatrix::new([-0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn motion_branch_only() {
        let gains = derive_gains([100.0; 6], [10.0; 6]).unwrap();
        let integ = ForceIntegral::new([10.0; 6]);
        let xe = Pose6::new(0.01, 0.0, 0.0, 0.0, 0.0, 0.0);
        let u = nominal_command(
            &xe,
            &Twist6::default(),
            &Wrench6::default(),
            &integ,
            &SelectionMatrix::motion_only(),
            &gains,
        );
        assert_relative_eq!(u.u[0], 1.0, epsilon = 1e-15);
        assert_eq!(&u.u[1..], &[0.0; 5]);
    }

    #[test]
    fn force_branch_only() {
        let gains = derive_gains([100.0; 6], [10.0; 6]).unwrap();
        let integ = ForceIntegral::new([10.0; 6]);
        let fe = Wrench6::from_array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let u = nominal_command(
            &Pose6::default(),
            &Twist6::default(),
            &fe,
            &integ,
            &SelectionMatrix::force_only(),
            &gains,
        );
        assert_relative_eq!(u.u[2], 20.0, epsilon = 1e-15);
        assert_eq!(u.u[0], 0.0);
    }

    #[test]
    fn equilibrium_is_zero() {
        let gains = derive_gains([100.0; 6], [10.0; 6]).unwrap();
        let integ = ForceIntegral::new([10.0; 6]);
        let sigma = SelectionMatrix::new([0.3; 6]).unwrap();
        let u = nominal_command(
            &Pose6::default(),
            &Twist6::default(),
            &Wrench6::default(),
            &integ,
            &sigma,
            &gains,
        );
        assert_eq!(u.u, [0.0; 6]);
    }

    #[test]
    fn integral_accumulates_and_clamps() {
        let integ = ForceIntegral::new([0.02; 6]);
        let same = update_integral(&integ, &Wrench6::default(), 0.002);
        assert_eq!(same.accum(), Wrench6::default());

        let fe = Wrench6::from_array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let one = update_integral(&integ, &fe, 0.002);
        assert_relative_eq!(one.accum().fz, 0.01, epsilon = 1e-15);

        let mut i = integ;
        for _ in 0..100 {
            i = update_integral(&i, &fe, 0.002);
        }
        assert_relative_eq!(i.accum().fz, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn compose_is_sum_then_saturate() {
        let nom = ControlCommand { u: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0] };
        let rl = ControlCommand { u: [-0.3, 0.0, 0.0, 0.0, 0.0, 0.0] };
        let u = compose(&nom, &rl, &bounds());
        assert_relative_eq!(u.u[0], 0.7, epsilon = 1e-15);

        let u = compose(&nom, &ControlCommand::zero(), &bounds());
        assert_eq!(u.u, nom.u);

        let big = ControlCommand { u: [1.5, 0.0, 0.0, 0.0, 0.0, 0.0] };
        let u = compose(&nom, &big, &bounds());
        assert_eq!(u.u[0], 2.0);
    }

    #[test]
    fn compose_commutes_before_saturation() {
        let a = ControlCommand { u: [0.2, -0.4, 0.1, 0.0, 0.3, -0.2] };
        let b = ControlCommand { u: [-0.1, 0.2, 0.5, 0.1, -0.3, 0.0] };
        assert_eq!(compose(&a, &b, &bounds()), compose(&b, &a, &bounds()));
    }
}
