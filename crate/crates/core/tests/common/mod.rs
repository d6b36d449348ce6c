//! Shared test support: an independent brute-force contact-depth oracle and
//! random pose generation near the hole mouth.

use nalgebra::Vector3;
use rand::Rng;
use residskill_core::se3::Pose6;
use residskill_core::sim::PegHoleGeometry;

/// Penetration depth of one point against the hole solid, written directly
/// from the geometric definition: below the mouth plane, either inside the
/// cavity (free) or assigned the smallest distance among the valid bounding
/// faces (top plane where material exists, walls within the bore span).
/// Chamfer-free geometry only.
pub fn oracle_point_depth(p: Vector3<f64>, geom: &PegHoleGeometry) -> f64 {
    assert_eq!(geom.chamfer, 0.0, "oracle covers chamfer-free geometry");
    let hw = geom.hole_side / 2.0;
    if p.z >= 0.0 {
        return 0.0;
    }
    let in_cavity = p.x.abs() <= hw && p.y.abs() <= hw && p.z >= -geom.hole_depth;
    if in_cavity {
        return 0.0;
    }
    if p.z < -geom.hole_depth && p.x.abs() <= hw && p.y.abs() <= hw {
        // Under the cavity floor: unmodeled, matching the contact model.
        return 0.0;
    }
    let mut candidates = Vec::new();
    if p.x.abs().max(p.y.abs()) >= hw {
        candidates.push(-p.z);
    }
    if (-geom.hole_depth..=0.0).contains(&p.z) {
        for excess in [p.x - hw, -hw - p.x, p.y - hw, -hw - p.y] {
            if excess > 0.0 {
                candidates.push(excess);
            }
        }
    }
    candidates.into_iter().fold(0.0, f64::max)
}

/// Maximum penetration over a dense sampling of the peg edges: `n_points`
/// uniformly by edge length, plus the exact parameter values where each edge
/// crosses a boundary plane, so the piecewise-linear depth profile is sampled
/// at every breakpoint.
pub fn oracle_max_depth(pose: &Pose6, geom: &PegHoleGeometry, n_points: usize) -> f64 {
    let rot = pose.rotation();
    let trans = pose.translation();
    let corners = geom.peg_corners().map(|c| rot * c + trans);
    let edges = geom.peg_edges();
    let total_len: f64 = edges.iter().map(|&(i, j)| (corners[j] - corners[i]).norm()).sum();

    let hw = geom.hole_side / 2.0;
    let mut max_depth: f64 = 0.0;
    for &(i, j) in edges.iter() {
        let a = corners[i];
        let b = corners[j];
        let d = b - a;
        let len = d.norm();
        let count = ((n_points as f64) * len / total_len).ceil() as usize;

        let mut params: Vec<f64> = (0..=count).map(|k| k as f64 / count as f64).collect();
        for (num, den) in [
            (-a.z, d.z),
            (-geom.hole_depth - a.z, d.z),
            (hw - a.x, d.x),
            (-hw - a.x, d.x),
            (hw - a.y, d.y),
            (-hw - a.y, d.y),
        ] {
            if den.abs() > 1e-12 {
                let t = num / den;
                if (0.0..=1.0).contains(&t) {
                    params.push(t);
                }
            }
        }
        for t in params {
            max_depth = max_depth.max(oracle_point_depth(a + d * t, geom));
        }
    }
    max_depth
}

/// Random pose in the contact-rich neighborhood of the hole mouth.
pub fn random_near_mouth_pose<R: Rng>(rng: &mut R, _geom: &PegHoleGeometry) -> Pose6 {
    Pose6::new(
        rng.random_range(-0.004..0.004),
        rng.random_range(-0.004..0.004),
        rng.random_range(-0.010..0.002),
        rng.random_range(-0.15..0.15),
        rng.random_range(-0.15..0.15),
        rng.random_range(-0.05..0.05),
    )
}
