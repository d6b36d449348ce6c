//! 1-D point-mass environment for learning sanity checks.
//!
//! State `[position, velocity]`, one bounded acceleration action. Reward is a
//! hold bonus inside the goal zone around the origin plus a small proximity
//! shaping term, so a random policy scores little while a competent one parks
//! and holds; returns stay nonnegative, which keeps ratio-based learning
//! checks meaningful.

use crate::env::{EnvStep, Environment, StepInfo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const GOAL_ZONE: f64 = 0.1;
/// Hard workspace walls; hitting one stops the mass.
pub const WALL: f64 = 2.0;

pub struct PointMassEnv {
    pos: f64,
    vel: f64,
    steps: usize,
    max_steps: usize,
    dt: f64,
    done: bool,
}

impl PointMassEnv {
    pub fn new() -> Self {
        Self { pos: 0.0, vel: 0.0, steps: 0, max_steps: 150, dt: 0.05, done: true }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos, self.vel]
    }

    fn in_zone(&self) -> bool {
        self.pos.abs() < GOAL_ZONE
    }
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMassEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(episode_seed);
        self.pos = rng.random_range(-1.0..=1.0);
        self.vel = 0.0;
        self.steps = 0;
        self.done = false;
        self.obs()
    }

    fn step(&mut self, raw_action: &[f64]) -> EnvStep {
        assert!(!self.done, "environment must be reset before stepping");
        let a = raw_action[0].clamp(-1.0, 1.0);
        let accel = 4.0 * a - 2.0 * self.vel;
        self.vel += accel * self.dt;
        self.pos += self.vel * self.dt;
        self.steps += 1;
        self.done = self.steps >= self.max_steps;

        if self.pos.abs() > WALL {
            self.pos = self.pos.clamp(-WALL, WALL);
            self.vel = 0.0;
        }

        let hold = if self.in_zone() { 1.0 } else { 0.0 };
        let proximity = 0.2 * (-(self.pos / 0.25) * (self.pos / 0.25)).exp();
        let reward = hold + proximity;
        EnvStep {
            obs: self.obs(),
            reward,
            done: self.done,
            info: StepInfo {
                inserted: self.in_zone(),
                align_event: false,
                collision: false,
                non_finite: false,
                depth: 0.0,
                sim_time: self.steps as f64 * self.dt,
                dense: reward,
                sparse: 0.0,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_seed_deterministic() {
        let mut env = PointMassEnv::new();
        let a = env.reset(5);
        let b = env.reset(5);
        assert_eq!(a, b);
        let c = env.reset(6);
        assert_ne!(a, c);
        assert!(a[0].abs() <= 1.0);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn constant_push_moves_the_mass() {
        let mut env = PointMassEnv::new();
        env.reset(1);
        let start = env.pos;
        for _ in 0..20 {
            env.step(&[1.0]);
        }
        assert!(env.pos > start, "positive action accelerates rightward");
    }

    #[test]
    fn episode_ends_at_max_steps() {
        let mut env = PointMassEnv::new();
        env.reset(2);
        let mut last_done = false;
        for k in 0..150 {
            let s = env.step(&[0.0]);
            last_done = s.done;
            assert_eq!(s.done, k == 149);
        }
        assert!(last_done);
    }

    #[test]
    fn reward_peaks_in_zone_and_decays_outside() {
        let mut env = PointMassEnv::new();
        env.reset(3);
        env.pos = 0.0;
        env.vel = 0.0;
        let s = env.step(&[0.0]);
        assert!(s.reward > 1.4, "in-zone reward includes the hold bonus, got {}", s.reward);
        env.pos = 0.9;
        env.vel = 0.0;
        let s = env.step(&[0.0]);
        assert!(s.reward < 0.01, "far from the zone only a sliver of shaping remains");
        assert!(s.reward >= 0.0);
    }
}
