//! Property tests for the module invariants.

mod common;

use common::{oracle_max_depth, random_near_mouth_pose};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use residskill_core::control::{
    compose, derive_gains, nominal_command, CommandBounds, ControlCommand, ForceIntegral,
    SelectionMatrix,
};
use residskill_core::env::{decode_action, ActionBounds, Observation, ACTION_DIM, FRAME_DIM};
use residskill_core::se3::{norm_blocks, pose_error, Pose6, Twist6, Wrench6};
use residskill_core::sim::{
    contact_query, contact_wrench, max_penetration, step, AdmittanceParams, ContactParams,
    ContactPoint, PegHoleGeometry, SimState,
};
use residskill_core::skill::{blend_goal, BlendState};

fn finite_angle() -> impl Strategy<Value = f64> {
    -50.0..50.0
}

fn pose_strategy() -> impl Strategy<Value = Pose6> {
    (
        -1.0..1.0,
        -1.0..1.0,
        -1.0..1.0,
        finite_angle(),
        finite_angle(),
        finite_angle(),
    )
        .prop_map(|(x, y, z, a, b, g)| Pose6::new(x, y, z, a, b, g))
}

fn vec6() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-100.0..100.0f64)
}

proptest! {
    #[test]
    fn pose_error_self_is_zero(p in pose_strategy()) {
        let e = pose_error(&p, &p);
        prop_assert_eq!(e.to_array(), [0.0; 6]);
    }

    #[test]
    fn pose_error_angles_stay_wrapped(a in pose_strategy(), b in pose_strategy()) {
        let e = pose_error(&a, &b);
        for v in [e.alpha, e.beta, e.gamma] {
            prop_assert!(v > -std::f64::consts::PI && v <= std::f64::consts::PI);
        }
    }

    #[test]
    fn norm_blocks_nonnegative_and_triangle(u in vec6(), v in vec6()) {
        let zero_t = Twist6::default();
        let zero_w = Wrench6::default();
        let nu = norm_blocks(&Pose6::from_array(u), &zero_t, &zero_w)[0];
        let nv = norm_blocks(&Pose6::from_array(v), &zero_t, &zero_w)[0];
        let mut sum = [0.0; 6];
        for i in 0..6 {
            sum[i] = u[i] + v[i];
        }
        // Build the sum pose without angle wrapping to test the raw norm.
        let ns = {
            let p = Pose6 { x: sum[0], y: sum[1], z: sum[2], alpha: sum[3], beta: sum[4], gamma: sum[5] };
            norm_blocks(&p, &zero_t, &zero_w)[0]
        };
        prop_assert!(nu >= 0.0 && nv >= 0.0);
        prop_assert!(ns <= nu + nv + 1e-9);
    }

    #[test]
    fn nominal_command_is_linear(
        xe in vec6(),
        xd in vec6(),
        fe in vec6(),
        scale in -3.0..3.0f64,
        sigma_raw in prop::array::uniform6(0.0..1.0f64),
    ) {
        let gains = derive_gains([120.0, 80.0, 60.0, 9.0, 4.0, 1.0], [4.0, 2.0, 8.0, 1.0, 0.5, 0.25]).unwrap();
        let sigma = SelectionMatrix::new(sigma_raw).unwrap();
        let integ = ForceIntegral::new([1e12; 6]);

        let build = |v: [f64; 6], s: f64| {
            let mut out = [0.0; 6];
            for i in 0..6 {
                out[i] = v[i] * s;
            }
            out
        };
        let cmd = |xe: [f64; 6], xd: [f64; 6], fe: [f64; 6]| {
            nominal_command(
                &Pose6 { x: xe[0], y: xe[1], z: xe[2], alpha: xe[3], beta: xe[4], gamma: xe[5] },
                &Twist6::from_array(xd),
                &Wrench6::from_array(fe),
                &integ,
                &sigma,
                &gains,
            )
        };

        // Homogeneity.
        let u1 = cmd(xe, xd, fe);
        let us = cmd(build(xe, scale), build(xd, scale), build(fe, scale));
        for i in 0..6 {
            let expect = scale * u1.u[i];
            prop_assert!((us.u[i] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        }

        // Additivity against a second input set (reuse xd/fe shuffled).
        let u2 = cmd(xd, fe, xe);
        let mut xs = [0.0; 6];
        let mut ds = [0.0; 6];
        let mut fs = [0.0; 6];
        for i in 0..6 {
            xs[i] = xe[i] + xd[i];
            ds[i] = xd[i] + fe[i];
            fs[i] = fe[i] + xe[i];
        }
        let usum = cmd(xs, ds, fs);
        for i in 0..6 {
            let expect = u1.u[i] + u2.u[i];
            prop_assert!((usum.u[i] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn derive_gains_relations_hold_exactly(kp_x in prop::array::uniform6(0.0..500.0f64), kp_f in prop::array::uniform6(0.0..50.0f64)) {
        let g = derive_gains(kp_x, kp_f).unwrap();
        for i in 0..6 {
            prop_assert_eq!(g.kd_x[i], 2.0 * kp_x[i].sqrt());
            prop_assert_eq!(g.ki_f[i], 0.01 * kp_f[i]);
        }
    }

    #[test]
    fn compose_identity_and_commutativity(a in vec6(), b in vec6()) {
        let bounds = CommandBounds { linear: 1e18, angular: 1e18 };
        let ua = ControlCommand { u: a };
        let ub = ControlCommand { u: b };
        let zero = ControlCommand::zero();
        prop_assert_eq!(compose(&ua, &zero, &bounds).u, ua.u);
        prop_assert_eq!(compose(&ua, &ub, &bounds).u, compose(&ub, &ua, &bounds).u);

        let tight = CommandBounds { linear: 0.05, angular: 0.5 };
        let c = compose(&ua, &ub, &tight);
        for i in 0..6 {
            prop_assert!(c.u[i].abs() <= tight.limit(i) + 1e-15);
        }
    }

    #[test]
    fn friction_cone_on_random_single_contacts(
        depth in 1e-6..4e-3f64,
        nx in -1.0..1.0f64,
        ny in -1.0..1.0f64,
        vx in -0.2..0.2f64,
        vy in -0.2..0.2f64,
        vz in -0.2..0.2f64,
        wx in -1.0..1.0f64,
    ) {
        let params = ContactParams { mu: 0.2, ..ContactParams::default() };
        let nz = (1.0 - (nx * nx + ny * ny)).max(0.0).sqrt();
        let n = Vector3::new(nx, ny, nz);
        let n = if n.norm() < 1e-6 { Vector3::new(0.0, 0.0, 1.0) } else { n.normalize() };
        let contact = ContactPoint { point: Vector3::new(0.004, -0.002, -depth), normal: n, depth };
        let twist = Twist6::from_array([vx, vy, vz, wx, -wx, 0.3 * wx]);
        let w = contact_wrench(&[contact], &twist, &params, &Pose6::default());

        let f = Vector3::new(w.fx, w.fy, w.fz);
        let f_n = f.dot(&n);
        let f_t = (f - n * f_n).norm();
        prop_assert!(f_n >= 0.0 && f_n <= params.f_cap);
        prop_assert!(f_t <= params.mu * f_n + 1e-9, "f_t {} vs mu f_n {}", f_t, params.mu * f_n);
    }

    #[test]
    fn decode_action_respects_bounds(raw in prop::collection::vec(-5.0..5.0f64, ACTION_DIM)) {
        let bounds = ActionBounds::default();
        let a = decode_action(&raw, &bounds);
        let xa = a.goal_offset.to_array();
        for i in 0..3 {
            prop_assert!(xa[i].abs() <= bounds.xa_lin + 1e-12);
            prop_assert!(xa[3 + i].abs() <= bounds.xa_ang + 1e-12);
        }
        for i in 0..6 {
            prop_assert!(a.kp_x[i] >= bounds.kp_x_lo && a.kp_x[i] <= bounds.kp_x_hi);
            prop_assert!(a.kp_f[i] >= bounds.kp_f_lo && a.kp_f[i] <= bounds.kp_f_hi);
            prop_assert!((0.0..=1.0).contains(&a.sigma[i]));
        }
    }

    #[test]
    fn blend_goal_endpoints_and_monotone(z_align in -0.01..0.01f64, z_insert in -0.04..0.0f64, steps in 2usize..20) {
        let x_align = Pose6::new(0.001, -0.002, z_align, 0.01, -0.02, 0.03);
        let x_insert = Pose6::new(-0.001, 0.002, z_insert, -0.01, 0.02, -0.03);
        let mut b = BlendState::new(x_align, x_insert, 0.005);
        b.alpha_smooth = 0.0;
        prop_assert_eq!(blend_goal(&b), x_align);
        b.alpha_smooth = 1.0;
        prop_assert_eq!(blend_goal(&b), x_insert);

        // Componentwise monotone in alpha.
        let mut prev = blend_goal(&BlendState { alpha_smooth: 0.0, ..b });
        for k in 1..=steps {
            let alpha = k as f64 / steps as f64;
            let cur = blend_goal(&BlendState { alpha_smooth: alpha, ..b });
            let (p, c) = (prev.to_array(), cur.to_array());
            for i in 0..6 {
                let dir = x_insert.to_array()[i] - x_align.to_array()[i];
                if dir >= 0.0 {
                    prop_assert!(c[i] >= p[i] - 1e-12);
                } else {
                    prop_assert!(c[i] <= p[i] + 1e-12);
                }
            }
            prev = cur;
        }
    }

    #[test]
    fn observation_flatten_length(history in 1usize..8, pushes in 0usize..20) {
        let mut obs = Observation::filled(history, [0.0; FRAME_DIM]);
        for k in 0..pushes {
            obs.push_frame([k as f64; FRAME_DIM]);
        }
        prop_assert_eq!(obs.flatten().len(), FRAME_DIM * history);
    }
}

#[test]
fn contact_query_matches_dense_oracle_on_random_poses() {
    let geom = PegHoleGeometry::default();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_917);
    let mut contacting = 0;
    for _ in 0..100 {
        let pose = random_near_mouth_pose(&mut rng, &geom);
        let impl_max = max_penetration(&pose, &geom);
        let oracle = oracle_max_depth(&pose, &geom, 10_000);
        assert!(
            (impl_max - oracle).abs() <= 1e-5,
            "pose {pose:?}: impl {impl_max} vs oracle {oracle}"
        );
        if oracle > 0.0 {
            contacting += 1;
        }
    }
    assert!(contacting >= 20, "need a contact-rich pose sample, got {contacting}");
}

#[test]
fn penetration_bound_holds_under_random_commands() {
    let geom = PegHoleGeometry::default();
    let params = ContactParams::default();
    let admit = AdmittanceParams::default();
    let bound = params.penetration_bound() + 1e-6;
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut state = SimState::at_pose(Pose6::new(0.0, 0.0, 0.003, 0.1, -0.05, 0.02));
    for k in 0..2000 {
        use rand::Rng;
        let cmd = Twist6::from_array([
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let (next, _) = step(&state, &cmd, 0.002, &geom, &params, &admit).unwrap();
        state = next;
        let pen = max_penetration(&state.peg_pose, &geom);
        assert!(pen <= bound, "step {k}: penetration {pen} exceeds bound {bound}");
        // Keep the peg near the mouth so contact keeps happening.
        if state.peg_pose.z > 0.01 {
            state.peg_pose.z = 0.003;
        }
        if state.peg_pose.z < -0.02 {
            state.peg_pose.z = 0.0;
        }
    }
}

#[test]
fn wrench_zero_iff_no_contact_on_random_poses() {
    let geom = PegHoleGeometry::default();
    let params = ContactParams::default();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    for _ in 0..200 {
        let pose = random_near_mouth_pose(&mut rng, &geom);
        let contacts = contact_query(&pose, &geom);
        let twist = Twist6::from_array([0.01, -0.02, -0.01, 0.1, 0.0, 0.0]);
        let w = contact_wrench(&contacts, &twist, &params, &pose);
        let zero = w == Wrench6::default();
        // Zero wrench can also occur with contacts at exactly zero depth and
        // no approach velocity, but a nonzero wrench requires contact.
        if !zero {
            assert!(!contacts.is_empty());
        }
        if contacts.is_empty() {
            assert!(zero);
        }
    }
}
