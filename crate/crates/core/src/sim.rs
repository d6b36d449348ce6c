//! Quasi-static square-peg-in-square-hole contact simulation.
//!
//! The hole frame has its origin at the hole-mouth center with +z up; the
//! material surface around the opening is the z = 0 plane. The peg frame sits
//! at the center of the peg's bottom face. Contact is penalty-based: peg
//! sample points (corners, edge subsamples, and edge/plane crossing points)
//! are tested against the hole-top plane, the four hole walls, and optional
//! 45-degree chamfer facets, keeping the smallest-depth candidate per point.
//!
//! The peg itself is a velocity-commanded admittance: each step integrates
//! the commanded twist and adds a deflection proportional to the contact
//! wrench, so sustained commands into a surface produce bounded penetration
//! and a rate-dependent reaction force.

use crate::se3::{wrap_angle, Pose6, Twist6, Wrench6};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("geometry invalid: {0}")]
    BadGeometry(String),
    #[error("contact parameters invalid: {0}")]
    BadParams(String),
    #[error("simulation state became non-finite")]
    NonFinite,
}

/// Square peg and square hole dimensions, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PegHoleGeometry {
    pub peg_side: f64,
    pub peg_length: f64,
    pub hole_side: f64,
    pub hole_depth: f64,
    /// 45-degree lip chamfer width; 0 disables the chamfer facets.
    pub chamfer: f64,
    /// Uniform interior subsamples per peg edge used for contact detection.
    pub edge_subsamples: usize,
}

impl Default for PegHoleGeometry {
    fn default() -> Self {
        Self {
            peg_side: 0.020,
            peg_length: 0.060,
            hole_side: 0.021,
            hole_depth: 0.030,
            chamfer: 0.0,
            edge_subsamples: 2,
        }
    }
}

impl PegHoleGeometry {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.peg_side > 0.0 && self.peg_length > 0.0 && self.hole_side > 0.0 && self.hole_depth > 0.0) {
            return Err(SimError::BadGeometry("all dimensions must be positive".into()));
        }
        if self.hole_side <= self.peg_side {
            return Err(SimError::BadGeometry(format!(
                "hole_side {} must exceed peg_side {}",
                self.hole_side, self.peg_side
            )));
        }
        if self.chamfer < 0.0 {
            return Err(SimError::BadGeometry("chamfer must be nonnegative".into()));
        }
        Ok(())
    }

    /// Diametral clearance `hole_side - peg_side`.
    pub fn clearance(&self) -> f64 {
        self.hole_side - self.peg_side
    }

    /// Corners of the peg in the peg frame (bottom face first).
    pub fn peg_corners(&self) -> [Vector3<f64>; 8] {
        let h = self.peg_side / 2.0;
        let l = self.peg_length;
        [
            Vector3::new(-h, -h, 0.0),
            Vector3::new(h, -h, 0.0),
            Vector3::new(h, h, 0.0),
            Vector3::new(-h, h, 0.0),
            Vector3::new(-h, -h, l),
            Vector3::new(h, -h, l),
            Vector3::new(h, h, l),
            Vector3::new(-h, h, l),
        ]
    }

    /// The 12 peg edges as index pairs into `peg_corners`.
    pub fn peg_edges(&self) -> [(usize, usize); 12] {
        [
            (0, 1), (1, 2), (2, 3), (3, 0), // bottom face
            (4, 5), (5, 6), (6, 7), (7, 4), // top face
            (0, 4), (1, 5), (2, 6), (3, 7), // verticals
        ]
    }
}

/// Penalty-contact coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Normal stiffness, N/m of penetration, per contact point.
    pub k_n: f64,
    /// Normal damping, N s/m.
    pub b_n: f64,
    /// Per-contact normal force cap, N.
    pub f_cap: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { mu: 0.2, k_n: 1e4, b_n: 50.0, f_cap: 50.0 }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(SimError::BadParams(format!("mu {} outside [0, 1]", self.mu)));
        }
        if self.k_n <= 0.0 {
            return Err(SimError::BadParams("k_n must be positive".into()));
        }
        if self.b_n < 0.0 {
            return Err(SimError::BadParams("b_n must be nonnegative".into()));
        }
        if self.f_cap <= 0.0 {
            return Err(SimError::BadParams("f_cap must be positive".into()));
        }
        Ok(())
    }

    /// Largest penetration the stepper permits (plus a small epsilon).
    pub fn penetration_bound(&self) -> f64 {
        self.f_cap / self.k_n
    }
}

/// Velocity-admittance gains mapping contact wrench to deflection rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceParams {
    /// m/s per N.
    pub lin: f64,
    /// rad/s per N m.
    pub ang: f64,
}

impl Default for AdmittanceParams {
    /// Sized so the discrete penalty/deflection loop stays contractive for
    /// the default stiffness, damping, and contact-point counts at the 500 Hz
    /// control period.
    fn default() -> Self {
        Self { lin: 5e-4, ang: 0.05 }
    }
}

/// World state of the simulated peg, expressed in the hole frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub peg_pose: Pose6,
    pub peg_twist: Twist6,
    pub time: f64,
    pub last_wrench: Wrench6,
}

impl SimState {
    pub fn at_pose(pose: Pose6) -> Self {
        Self {
            peg_pose: pose,
            peg_twist: Twist6::default(),
            time: 0.0,
            last_wrench: Wrench6::default(),
        }
    }
}

/// A single penetrating sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// Location in the hole frame.
    pub point: Vector3<f64>,
    /// Unit normal pointing out of the material (direction of the push on the peg).
    pub normal: Vector3<f64>,
    /// Penetration depth, m.
    pub depth: f64,
}

/// Initial-pose randomization ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitRanges {
    /// Symmetric lateral offset bound for x and y, m.
    pub lateral_offset: f64,
    /// Height of the peg bottom-face center above the mouth, m.
    pub height_lo: f64,
    pub height_hi: f64,
    /// Inclination magnitude range for alpha and beta, rad (sign randomized).
    pub incline_lo: f64,
    pub incline_hi: f64,
    /// Symmetric yaw bound, rad.
    pub yaw: f64,
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            lateral_offset: 0.003,
            height_lo: 0.005,
            height_hi: 0.015,
            incline_lo: 0.1,
            incline_hi: 0.15,
            yaw: 0.05,
        }
    }
}

impl InitRanges {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.lateral_offset < 0.0 || self.yaw < 0.0 {
            return Err(SimError::BadParams("offset ranges must be nonnegative".into()));
        }
        if self.height_lo > self.height_hi {
            return Err(SimError::BadParams("height_lo must not exceed height_hi".into()));
        }
        if self.incline_lo > self.incline_hi || self.incline_lo < 0.0 {
            return Err(SimError::BadParams("invalid incline range".into()));
        }
        Ok(())
    }
}

/// Sample points on the peg surface in the hole frame: the 8 corners, uniform
/// edge subsamples, and the exact crossings of each edge with the contact
/// boundary planes (z = 0, z = -hole_depth, |x| = hole_side/2, |y| = hole_side/2).
/// Plane crossings make the per-edge penetration profile piecewise linear
/// between consecutive samples, so its maximum is attained at a sample.
pub fn sample_points(pose: &Pose6, geom: &PegHoleGeometry) -> Vec<Vector3<f64>> {
    let rot = pose.rotation();
    let trans = pose.translation();
    let corners_local = geom.peg_corners();
    let corners: Vec<Vector3<f64>> = corners_local.iter().map(|c| rot * c + trans).collect();

    let mut pts = corners.clone();
    let hw = geom.hole_side / 2.0;
    for &(i, j) in geom.peg_edges().iter() {
        let a = corners[i];
        let b = corners[j];
        let d = b - a;
        for k in 1..=geom.edge_subsamples {
            let t = k as f64 / (geom.edge_subsamples + 1) as f64;
            pts.push(a + d * t);
        }
        // Crossing parameters with each boundary plane.
        let mut push_crossing = |num: f64, den: f64| {
            if den.abs() > 1e-12 {
                let t = num / den;
                if t > 1e-9 && t < 1.0 - 1e-9 {
                    pts.push(a + d * t);
                }
            }
        };
        push_crossing(-a.z, d.z); // z = 0
        push_crossing(-geom.hole_depth - a.z, d.z); // z = -hole_depth
        push_crossing(hw - a.x, d.x); // x = +hw
        push_crossing(-hw - a.x, d.x); // x = -hw
        push_crossing(hw - a.y, d.y); // y = +hw
        push_crossing(-hw - a.y, d.y); // y = -hw
    }
    pts
}

/// Smallest-depth contact candidate for one point, or None if in free space.
fn point_contact(p: Vector3<f64>, geom: &PegHoleGeometry) -> Option<(Vector3<f64>, f64)> {
    if p.z >= 0.0 {
        return None;
    }
    let hw = geom.hole_side / 2.0;
    let c = geom.chamfer;

    // Opening half-width at height z, accounting for the chamfer taper.
    let widen = if c > 0.0 { (p.z + c).clamp(0.0, c) } else { 0.0 };
    let hw_z = hw + widen;
    let inside_cavity = p.x.abs() <= hw_z && p.y.abs() <= hw_z && p.z >= -geom.hole_depth;
    if inside_cavity {
        return None;
    }
    // Below the cavity floor and within the opening: unmodeled (the floor is
    // not a contact surface; insertion goals stay above it).
    if p.z < -geom.hole_depth && p.x.abs() <= hw && p.y.abs() <= hw {
        return None;
    }

    let mut best: Option<(Vector3<f64>, f64)> = None;
    let mut consider = |normal: Vector3<f64>, depth: f64| {
        if depth > 0.0 && best.is_none_or(|(_, d)| depth < d) {
            best = Some((normal, depth));
        }
    };

    // Top plane, valid where material actually exists at z = 0.
    if p.x.abs().max(p.y.abs()) >= hw + c {
        consider(Vector3::new(0.0, 0.0, 1.0), -p.z);
    }
    // Walls, valid below the chamfer band.
    if p.z >= -geom.hole_depth && p.z <= -c {
        if p.x > hw {
            consider(Vector3::new(-1.0, 0.0, 0.0), p.x - hw);
        }
        if p.x < -hw {
            consider(Vector3::new(1.0, 0.0, 0.0), -hw - p.x);
        }
        if p.y > hw {
            consider(Vector3::new(0.0, -1.0, 0.0), p.y - hw);
        }
        if p.y < -hw {
            consider(Vector3::new(0.0, 1.0, 0.0), -hw - p.y);
        }
    }
    // 45-degree chamfer facets around the lip.
    if c > 0.0 && p.z >= -c - geom.hole_depth.min(c) {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        // +x facet passes through (hw + c, *, 0) with inward-up normal.
        let facets = [
            (Vector3::new(-inv_sqrt2, 0.0, inv_sqrt2), p.x - (hw + c)),
            (Vector3::new(inv_sqrt2, 0.0, inv_sqrt2), -(hw + c) - p.x),
            (Vector3::new(0.0, -inv_sqrt2, inv_sqrt2), p.y - (hw + c)),
            (Vector3::new(0.0, inv_sqrt2, inv_sqrt2), -(hw + c) - p.y),
        ];
        for (normal, lateral_excess) in facets {
            // Signed distance into the facet halfspace: (excess + (-z)) / sqrt(2).
            let depth = (lateral_excess - p.z) * inv_sqrt2;
            if depth > 0.0 && lateral_excess > -c {
                consider(normal, depth);
            }
        }
    }
    best
}

/// All penetrating sample points for the given pose.
pub fn contact_query(pose: &Pose6, geom: &PegHoleGeometry) -> Vec<ContactPoint> {
    sample_points(pose, geom)
        .into_iter()
        .filter_map(|p| {
            point_contact(p, geom).map(|(normal, depth)| ContactPoint { point: p, normal, depth })
        })
        .collect()
}

/// Deepest penetration over the sample set, 0 when contact-free.
pub fn max_penetration(pose: &Pose6, geom: &PegHoleGeometry) -> f64 {
    sample_points(pose, geom)
        .into_iter()
        .filter_map(|p| point_contact(p, geom).map(|(_, d)| d))
        .fold(0.0, f64::max)
}

/// Total reaction wrench about the peg frame origin, in hole-frame axes.
///
/// Per contact, the normal force is `clamp(k_n depth + b_n rate, 0, f_cap)`
/// and the tangential force opposes slip with magnitude
/// `min(mu f_n, b_n |v_t|)`, a viscous-regularized Coulomb model.
pub fn contact_wrench(
    contacts: &[ContactPoint],
    twist: &Twist6,
    params: &ContactParams,
    pose: &Pose6,
) -> Wrench6 {
    let origin = pose.translation();
    let v = twist.linear();
    let w = twist.angular();
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for c in contacts {
        let r = c.point - origin;
        let v_pt = v + w.cross(&r);
        let v_n = c.normal.dot(&v_pt);
        let rate = -v_n; // positive when moving into the material
        let f_n = (params.k_n * c.depth + params.b_n * rate).clamp(0.0, params.f_cap);
        let v_t = v_pt - c.normal * v_n;
        let v_t_norm = v_t.norm();
        let mut f = c.normal * f_n;
        if v_t_norm > 1e-12 {
            let f_t = (params.mu * f_n).min(params.b_n * v_t_norm);
            f -= v_t * (f_t / v_t_norm);
        }
        force += f;
        torque += r.cross(&f);
    }
    Wrench6 {
        fx: force.x,
        fy: force.y,
        fz: force.z,
        tx: torque.x,
        ty: torque.y,
        tz: torque.z,
    }
}

fn integrate_pose(pose: &Pose6, rates: [f64; 6], dt: f64) -> Pose6 {
    Pose6 {
        x: pose.x + rates[0] * dt,
        y: pose.y + rates[1] * dt,
        z: pose.z + rates[2] * dt,
        alpha: wrap_angle(pose.alpha + rates[3] * dt),
        beta: wrap_angle(pose.beta + rates[4] * dt),
        gamma: wrap_angle(pose.gamma + rates[5] * dt),
    }
}

/// Push the pose out of any penetration deeper than the per-contact bound.
/// Only active under commands far beyond the saturation envelope; the final
/// fallback lifts the peg clear, which always terminates because points at
/// z >= 0 cannot contact.
fn enforce_penetration_bound(mut pose: Pose6, geom: &PegHoleGeometry, bound: f64) -> Pose6 {
    for _ in 0..16 {
        let deepest = contact_query(&pose, geom)
            .into_iter()
            .max_by(|a, b| a.depth.total_cmp(&b.depth));
        match deepest {
            Some(c) if c.depth > bound => {
                let push = c.normal * (c.depth - bound);
                pose.x += push.x;
                pose.y += push.y;
                pose.z += push.z;
            }
            _ => return pose,
        }
    }
    let lowest = sample_points(&pose, geom)
        .into_iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min);
    if lowest < 0.0 {
        pose.z -= lowest - 1e-9;
    }
    pose
}

/// Advance the peg by one control period under a commanded twist.
///
/// The command integrates directly; contact forces at the integrated pose add
/// an admittance deflection. The returned wrench is also stored in
/// `state.last_wrench`, and `peg_twist` records the realized motion.
pub fn step(
    state: &SimState,
    command: &Twist6,
    dt: f64,
    geom: &PegHoleGeometry,
    params: &ContactParams,
    admit: &AdmittanceParams,
) -> Result<(SimState, Wrench6), SimError> {
    assert!(dt > 0.0, "dt must be positive");
    if !command.is_finite() || !state.peg_pose.is_finite() {
        return Err(SimError::NonFinite);
    }

    let pose_cmd = integrate_pose(&state.peg_pose, command.to_array(), dt);
    let contacts = contact_query(&pose_cmd, geom);
    // Damping and friction use the previously realized twist; the realized
    // twist of this step is not known until after the deflection.
    let wrench = contact_wrench(&contacts, &state.peg_twist, params, &pose_cmd);

    let deflect = [
        admit.lin * wrench.fx,
        admit.lin * wrench.fy,
        admit.lin * wrench.fz,
        admit.ang * wrench.tx,
        admit.ang * wrench.ty,
        admit.ang * wrench.tz,
    ];
    let mut pose_new = integrate_pose(&pose_cmd, deflect, dt);

    let bound = params.penetration_bound() + 1e-7;
    if max_penetration(&pose_new, geom) > bound {
        pose_new = enforce_penetration_bound(pose_new, geom, bound);
    }

    if !pose_new.is_finite() || !wrench.is_finite() {
        return Err(SimError::NonFinite);
    }

    let prev = state.peg_pose;
    let twist = Twist6 {
        vx: (pose_new.x - prev.x) / dt,
        vy: (pose_new.y - prev.y) / dt,
        vz: (pose_new.z - prev.z) / dt,
        walpha: wrap_angle(pose_new.alpha - prev.alpha) / dt,
        wbeta: wrap_angle(pose_new.beta - prev.beta) / dt,
        wgamma: wrap_angle(pose_new.gamma - prev.gamma) / dt,
    };
    Ok((
        SimState {
            peg_pose: pose_new,
            peg_twist: twist,
            time: state.time + dt,
            last_wrench: wrench,
        },
        wrench,
    ))
}

/// Depth of the lowest peg-bottom corner below the mouth plane, counted only
/// while the peg is over the opening. The containment test allows a small
/// lateral slack so penalty-model wall overlap does not zero the reading.
pub fn insertion_depth(pose: &Pose6, geom: &PegHoleGeometry) -> f64 {
    const WALL_SLACK: f64 = 0.005;
    let rot = pose.rotation();
    let trans = pose.translation();
    let hw = geom.hole_side / 2.0;
    let corners = geom.peg_corners();
    let bottom: Vec<Vector3<f64>> = corners[..4].iter().map(|c| rot * c + trans).collect();

    let center = trans;
    if center.x.abs() > hw || center.y.abs() > hw {
        return 0.0;
    }
    let mut min_z = f64::INFINITY;
    for p in &bottom {
        if p.x.abs() > hw + WALL_SLACK || p.y.abs() > hw + WALL_SLACK {
            return 0.0;
        }
        min_z = min_z.min(p.z);
    }
    (-min_z).max(0.0)
}

/// Draw a randomized start pose: uniform lateral offset and height, uniform
/// inclination magnitudes with random signs, uniform small yaw.
pub fn sample_initial_pose<R: rand::Rng>(rng: &mut R, ranges: &InitRanges) -> Pose6 {
    fn uniform<R: rand::Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    }
    let x = uniform(rng, -ranges.lateral_offset, ranges.lateral_offset);
    let y = uniform(rng, -ranges.lateral_offset, ranges.lateral_offset);
    let z = uniform(rng, ranges.height_lo, ranges.height_hi);
    let alpha_mag = uniform(rng, ranges.incline_lo, ranges.incline_hi);
    let alpha = if rng.random_bool(0.5) { alpha_mag } else { -alpha_mag };
    let beta_mag = uniform(rng, ranges.incline_lo, ranges.incline_hi);
    let beta = if rng.random_bool(0.5) { beta_mag } else { -beta_mag };
    let gamma = uniform(rng, -ranges.yaw, ranges.yaw);
    Pose6::new(x, y, z, alpha, beta, gamma)
}
