//! Run configuration: a single TOML file with `sim`, `ctrl`, `skill`, `env`,
//! and `rl` sections. Unknown keys are rejected, every value is validated
//! against the owning module's invariants at load time, and the resolved
//! configuration can be snapshotted back to disk for reproducibility.
//!
//! The `RESIDSKILL_SEED` environment variable overrides the configured seed.

use crate::control::{derive_gains, CommandBounds, SelectionMatrix};
use crate::env::{ActionBounds, EnvParams, NoiseConfig, RewardWeights};
use crate::sac::SacHyper;
use crate::se3::Wrench6;
use crate::sim::{AdmittanceParams, ContactParams, InitRanges, PegHoleGeometry};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SEED_ENV_VAR: &str = "RESIDSKILL_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(String),
    #[error("config key {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.into(), reason: reason.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub peg_side: f64,
    pub peg_length: f64,
    pub hole_side: f64,
    pub hole_depth: f64,
    pub chamfer: f64,
    pub edge_subsamples: usize,
    pub mu: f64,
    pub k_n: f64,
    pub b_n: f64,
    pub f_cap: f64,
    pub admittance_lin: f64,
    pub admittance_ang: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let g = PegHoleGeometry::default();
        let c = ContactParams::default();
        let a = AdmittanceParams::default();
        Self {
            peg_side: g.peg_side,
            peg_length: g.peg_length,
            hole_side: g.hole_side,
            hole_depth: g.hole_depth,
            chamfer: g.chamfer,
            edge_subsamples: g.edge_subsamples,
            mu: c.mu,
            k_n: c.k_n,
            b_n: c.b_n,
            f_cap: c.f_cap,
            admittance_lin: a.lin,
            admittance_ang: a.ang,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtrlSection {
    pub kp_x: [f64; 6],
    pub kp_f: [f64; 6],
    pub sigma: [f64; 6],
    pub force_ref: [f64; 6],
    pub integral_clamp: [f64; 6],
    pub sat_lin: f64,
    pub sat_ang: f64,
    pub vel_filter: f64,
}

impl Default for CtrlSection {
    fn default() -> Self {
        let p = EnvParams::default();
        Self {
            kp_x: p.nominal_kp_x,
            kp_f: p.nominal_kp_f,
            sigma: p.nominal_sigma,
            force_ref: p.force_ref.to_array(),
            integral_clamp: p.integral_clamp,
            sat_lin: p.bounds.linear,
            sat_ang: p.bounds.angular,
            vel_filter: p.vel_filter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkillSection {
    /// Absolute lateral alignment tolerance; defaults to clearance / 2.
    pub lateral_tol: Option<f64>,
    pub tilt_tol: f64,
    pub tip_tol: f64,
    pub yaw_tol: f64,
    pub insert_frac: f64,
    pub f_col: f64,
    pub ramp_depth: f64,
    pub align_timeout: f64,
    pub insert_timeout: f64,
    pub goal_sigma_lin: f64,
    pub goal_sigma_ang: f64,
}

impl Default for SkillSection {
    fn default() -> Self {
        let p = EnvParams::default();
        Self {
            lateral_tol: None,
            tilt_tol: p.tilt_tol,
            tip_tol: p.tip_tol,
            yaw_tol: p.yaw_tol,
            insert_frac: p.insert_frac,
            f_col: p.f_col,
            ramp_depth: p.ramp_depth,
            align_timeout: 8.0,
            insert_timeout: 8.0,
            goal_sigma_lin: p.goal_sigma_lin,
            goal_sigma_ang: p.goal_sigma_ang,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub history_len: usize,
    pub xa_lin: f64,
    pub xa_ang: f64,
    pub kp_x_range: [f64; 2],
    pub kp_f_range: [f64; 2],
    pub noise_pose: f64,
    pub noise_twist: f64,
    pub noise_wrench: f64,
    pub timeout: f64,
    pub ctrl_hz: f64,
    pub policy_hz: f64,
    pub init_lateral: f64,
    pub init_height: [f64; 2],
    pub init_incline: [f64; 2],
    pub init_yaw: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let p = EnvParams::default();
        Self {
            history_len: p.history_len,
            xa_lin: p.action_bounds.xa_lin,
            xa_ang: p.action_bounds.xa_ang,
            kp_x_range: [p.action_bounds.kp_x_lo, p.action_bounds.kp_x_hi],
            kp_f_range: [p.action_bounds.kp_f_lo, p.action_bounds.kp_f_hi],
            noise_pose: p.noise.sigma_pose,
            noise_twist: p.noise.sigma_twist,
            noise_wrench: p.noise.sigma_wrench,
            timeout: p.timeout,
            ctrl_hz: p.ctrl_hz,
            policy_hz: p.policy_hz,
            init_lateral: p.init.lateral_offset,
            init_height: [p.init.height_lo, p.init.height_hi],
            init_incline: [p.init.incline_lo, p.init.incline_hi],
            init_yaw: p.init.yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub lr: f64,
    pub batch: usize,
    pub gamma: f64,
    pub tau: f64,
    pub target_entropy: f64,
    pub warmup: usize,
    pub total_steps: usize,
    pub updates_per_step: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for RlSection {
    fn default() -> Self {
        let h = SacHyper::default();
        Self {
            lr: h.lr,
            batch: h.batch,
            gamma: h.gamma,
            tau: h.tau,
            target_entropy: h.target_entropy,
            warmup: h.warmup,
            total_steps: h.total_steps,
            updates_per_step: h.updates_per_step,
            buffer_capacity: h.buffer_capacity,
            hidden: h.hidden,
            eval_every: h.eval_every,
            eval_episodes: h.eval_episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sim: SimSection,
    pub ctrl: CtrlSection,
    pub skill: SkillSection,
    pub env: EnvSection,
    pub rl: RlSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            sim: SimSection::default(),
            ctrl: CtrlSection::default(),
            skill: SkillSection::default(),
            env: EnvSection::default(),
            rl: RlSection::default(),
        }
    }
}

impl RunConfig {
    /// Parse, apply the seed override from the environment, and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            cfg.seed = v
                .parse()
                .map_err(|_| invalid("seed", format!("{SEED_ENV_VAR}={v} is not a valid u64")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize the resolved configuration; reloading the result yields an
    /// equivalent RunConfig.
    pub fn snapshot(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn geometry(&self) -> PegHoleGeometry {
        PegHoleGeometry {
            peg_side: self.sim.peg_side,
            peg_length: self.sim.peg_length,
            hole_side: self.sim.hole_side,
            hole_depth: self.sim.hole_depth,
            chamfer: self.sim.chamfer,
            edge_subsamples: self.sim.edge_subsamples,
        }
    }

    pub fn contact_params(&self) -> ContactParams {
        ContactParams { mu: self.sim.mu, k_n: self.sim.k_n, b_n: self.sim.b_n, f_cap: self.sim.f_cap }
    }

    pub fn lateral_tol(&self) -> f64 {
        self.skill.lateral_tol.unwrap_or(self.geometry().clearance() / 2.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry().validate().map_err(|e| invalid("sim", e))?;
        self.contact_params().validate().map_err(|e| invalid("sim", e))?;
        if self.sim.admittance_lin <= 0.0 || self.sim.admittance_ang <= 0.0 {
            return Err(invalid("sim.admittance_lin", "admittance gains must be positive"));
        }

        derive_gains(self.ctrl.kp_x, self.ctrl.kp_f).map_err(|e| invalid("ctrl.kp_x", e))?;
        SelectionMatrix::new(self.ctrl.sigma).map_err(|e| invalid("ctrl.sigma", e))?;
        if self.ctrl.sat_lin <= 0.0 || self.ctrl.sat_ang <= 0.0 {
            return Err(invalid("ctrl.sat_lin", "saturation bounds must be positive"));
        }
        if self.ctrl.integral_clamp.iter().any(|c| *c <= 0.0) {
            return Err(invalid("ctrl.integral_clamp", "anti-windup clamps must be positive"));
        }
        if !(0.0 < self.ctrl.vel_filter && self.ctrl.vel_filter <= 1.0) {
            return Err(invalid("ctrl.vel_filter", "must lie in (0, 1]"));
        }

        if let Some(t) = self.skill.lateral_tol {
            if t <= 0.0 {
                return Err(invalid("skill.lateral_tol", "tolerance must be positive"));
            }
        }
        for (key, v) in [
            ("skill.tilt_tol", self.skill.tilt_tol),
            ("skill.tip_tol", self.skill.tip_tol),
            ("skill.yaw_tol", self.skill.yaw_tol),
            ("skill.ramp_depth", self.skill.ramp_depth),
            ("skill.f_col", self.skill.f_col),
            ("skill.align_timeout", self.skill.align_timeout),
            ("skill.insert_timeout", self.skill.insert_timeout),
        ] {
            if v <= 0.0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if !(0.0 < self.skill.insert_frac && self.skill.insert_frac <= 1.0) {
            return Err(invalid("skill.insert_frac", "must lie in (0, 1]"));
        }
        if self.skill.goal_sigma_lin < 0.0 || self.skill.goal_sigma_ang < 0.0 {
            return Err(invalid("skill.goal_sigma_lin", "goal noise must be nonnegative"));
        }

        if self.env.history_len == 0 {
            return Err(invalid("env.history_len", "must be at least 1"));
        }
        self.action_bounds().validate().map_err(|e| invalid("env.kp_x_range", e))?;
        for i in 0..6 {
            let [lo, hi] = self.env.kp_x_range;
            if self.ctrl.kp_x[i] < lo || self.ctrl.kp_x[i] > hi {
                return Err(invalid(
                    "ctrl.kp_x",
                    format!(
                        "nominal gain {} on axis {i} lies outside env.kp_x_range [{lo}, {hi}] \
                         (the residual action space must bracket the nominal gains)",
                        self.ctrl.kp_x[i]
                    ),
                ));
            }
            if self.ctrl.kp_f[i] < self.env.kp_f_range[0] || self.ctrl.kp_f[i] > self.env.kp_f_range[1] {
                return Err(invalid(
                    "ctrl.kp_f",
                    format!("nominal gain {} on axis {i} lies outside env.kp_f_range", self.ctrl.kp_f[i]),
                ));
            }
        }
        if self.env.noise_pose < 0.0 || self.env.noise_twist < 0.0 || self.env.noise_wrench < 0.0 {
            return Err(invalid("env.noise_pose", "noise sigmas must be nonnegative"));
        }
        if self.env.timeout <= 0.0 {
            return Err(invalid("env.timeout", "must be positive"));
        }
        if self.env.ctrl_hz <= 0.0 || self.env.policy_hz <= 0.0 || self.env.ctrl_hz < self.env.policy_hz {
            return Err(invalid("env.ctrl_hz", "rates must be positive with ctrl_hz >= policy_hz"));
        }
        self.init_ranges().validate().map_err(|e| invalid("env.init_height", e))?;

        self.sac_hyper().validate().map_err(|e| invalid("rl", e))?;
        Ok(())
    }

    pub fn action_bounds(&self) -> ActionBounds {
        ActionBounds {
            xa_lin: self.env.xa_lin,
            xa_ang: self.env.xa_ang,
            kp_x_lo: self.env.kp_x_range[0],
            kp_x_hi: self.env.kp_x_range[1],
            kp_f_lo: self.env.kp_f_range[0],
            kp_f_hi: self.env.kp_f_range[1],
        }
    }

    pub fn init_ranges(&self) -> InitRanges {
        InitRanges {
            lateral_offset: self.env.init_lateral,
            height_lo: self.env.init_height[0],
            height_hi: self.env.init_height[1],
            incline_lo: self.env.init_incline[0],
            incline_hi: self.env.init_incline[1],
            yaw: self.env.init_yaw,
        }
    }

    pub fn env_params(&self) -> EnvParams {
        EnvParams {
            geom: self.geometry(),
            contact: self.contact_params(),
            admit: AdmittanceParams { lin: self.sim.admittance_lin, ang: self.sim.admittance_ang },
            init: self.init_ranges(),
            nominal_kp_x: self.ctrl.kp_x,
            nominal_kp_f: self.ctrl.kp_f,
            nominal_sigma: self.ctrl.sigma,
            force_ref: Wrench6::from_array(self.ctrl.force_ref),
            integral_clamp: self.ctrl.integral_clamp,
            bounds: CommandBounds { linear: self.ctrl.sat_lin, angular: self.ctrl.sat_ang },
            action_bounds: self.action_bounds(),
            weights: RewardWeights::default(),
            noise: NoiseConfig {
                sigma_pose: self.env.noise_pose,
                sigma_twist: self.env.noise_twist,
                sigma_wrench: self.env.noise_wrench,
            },
            history_len: self.env.history_len,
            ctrl_hz: self.env.ctrl_hz,
            policy_hz: self.env.policy_hz,
            timeout: self.env.timeout,
            goal_sigma_lin: self.skill.goal_sigma_lin,
            goal_sigma_ang: self.skill.goal_sigma_ang,
            lateral_tol: self.lateral_tol(),
            tilt_tol: self.skill.tilt_tol,
            tip_tol: self.skill.tip_tol,
            yaw_tol: self.skill.yaw_tol,
            insert_frac: self.skill.insert_frac,
            f_col: self.skill.f_col,
            ramp_depth: self.skill.ramp_depth,
            vel_filter: self.ctrl.vel_filter,
        }
    }

    pub fn sac_hyper(&self) -> SacHyper {
        SacHyper {
            lr: self.rl.lr,
            batch: self.rl.batch,
            gamma: self.rl.gamma,
            tau: self.rl.tau,
            target_entropy: self.rl.target_entropy,
            total_steps: self.rl.total_steps,
            warmup: self.rl.warmup,
            updates_per_step: self.rl.updates_per_step,
            buffer_capacity: self.rl.buffer_capacity,
            hidden: self.rl.hidden.clone(),
            eval_every: self.rl.eval_every,
            eval_episodes: self.rl.eval_episodes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "seed = 1\n[sim]\nnot_a_key = 3.0\n";
        let err = RunConfig::from_toml(text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("not_a_key"), "{err}");
    }

    #[test]
    fn mu_range_validation() {
        let ok = "seed = 1\n[sim]\nmu = 0.3\n";
        assert!(RunConfig::from_toml(ok).is_ok());
        let bad = "seed = 1\n[sim]\nmu = -0.1\n";
        let err = RunConfig::from_toml(bad).unwrap_err();
        assert!(err.to_string().contains("sim"), "{err}");
    }

    #[test]
    fn nominal_gains_must_fit_action_ranges() {
        let bad = "seed = 1\n[ctrl]\nkp_x = [500, 150, 100, 8, 8, 8]\n";
        let err = RunConfig::from_toml(bad).unwrap_err();
        assert!(err.to_string().contains("kp_x"), "{err}");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resolved.toml");
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.sim.mu = 0.15;
        cfg.rl.hidden = vec![32, 32];
        cfg.snapshot(&path).unwrap();
        let reloaded = RunConfig::load(&path).unwrap();
        assert_eq!(reloaded, cfg);
    }

    #[test]
    fn env_var_overrides_seed() {
        // Serialized through a mutex-free single test: the variable is
        // process-global, so set and clear it within this test only.
        std::env::set_var(SEED_ENV_VAR, "777");
        let cfg = RunConfig::from_toml("seed = 5\n").unwrap();
        std::env::remove_var(SEED_ENV_VAR);
        assert_eq!(cfg.seed, 777);
        let cfg = RunConfig::from_toml("seed = 5\n").unwrap();
        assert_eq!(cfg.seed, 5);
    }
}
