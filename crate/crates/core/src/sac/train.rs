//! Off-policy training loop: warmup with uniform random actions, one
//! environment step per iteration, gradient updates from the replay buffer,
//! periodic deterministic evaluation, and latest/best checkpointing.

use super::checkpoint::{self, CheckpointData, CheckpointError};
use super::mlp::Mlp;
use super::policy::{mean_action, sample_with_eps};
use super::replay::{ReplayBuffer, Transition};
use super::update::{update_step, SacNets, SacOptimizers, UpdateError};
use crate::env::Environment;
use crate::seed::{derive_seed, SeedStream};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at step {step}: {source}")]
    NonFinite { step: usize, source: UpdateError },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// SAC hyperparameters; the defaults follow the reference setup (learning
/// rate 1e-4, batch 400, replay capacity 1e6, [400, 400, 200] networks,
/// 2.5e5 training steps) with conventional completions for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacHyper {
    pub lr: f64,
    pub batch: usize,
    pub gamma: f64,
    pub tau: f64,
    pub target_entropy: f64,
    pub total_steps: usize,
    pub warmup: usize,
    pub updates_per_step: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// Deterministic evaluation cadence in environment steps; 0 disables.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 400,
            gamma: 0.99,
            tau: 0.005,
            target_entropy: -24.0,
            total_steps: 250_000,
            warmup: 1000,
            updates_per_step: 1,
            buffer_capacity: 1_000_000,
            hidden: vec![400, 400, 200],
            eval_every: 5000,
            eval_episodes: 10,
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<(), String> {
        if self.lr <= 0.0 {
            return Err("rl.lr must be positive".into());
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err("rl.gamma must lie in (0, 1)".into());
        }
        if !(0.0 < self.tau && self.tau <= 1.0) {
            return Err("rl.tau must lie in (0, 1]".into());
        }
        if self.batch == 0 {
            return Err("rl.batch must be at least 1".into());
        }
        if self.buffer_capacity < self.batch {
            return Err("rl.buffer_capacity must be at least rl.batch".into());
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|h| *h == 0) {
            return Err("rl.hidden must be a nonempty list of positive sizes".into());
        }
        if self.updates_per_step == 0 {
            return Err("rl.updates_per_step must be at least 1".into());
        }
        Ok(())
    }
}

/// Where to persist checkpoints during training.
#[derive(Debug, Clone)]
pub struct CheckpointPaths {
    pub latest: PathBuf,
    pub best: PathBuf,
}

/// Per-episode and per-evaluation notifications emitted by the trainer.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    Episode {
        step: usize,
        episode: usize,
        return_dense: f64,
        return_sparse: f64,
        success_align: bool,
        success_insert: bool,
        collision: bool,
        episode_len: usize,
        sim_time: f64,
    },
    Eval {
        step: usize,
        success_rate: f64,
        mean_return: f64,
        best: bool,
    },
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub episodes: usize,
    pub steps: usize,
    pub best_success_rate: f64,
    pub final_alpha: f64,
}

/// Draw one stochastic policy action for a single observation.
fn explore_action(actor: &Mlp, obs: &[f64], act_dim: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
    let eps = Array2::from_shape_fn((1, act_dim), |_| StandardNormal.sample(rng));
    let smp = sample_with_eps(actor, &x, eps);
    smp.action.row(0).to_vec()
}

/// Deterministic-policy evaluation: success rate and mean return over
/// seed-derived episodes.
pub fn evaluate<E: Environment>(
    env: &mut E,
    actor: &Mlp,
    episodes: usize,
    run_seed: u64,
) -> (f64, f64) {
    let mut successes = 0usize;
    let mut total_return = 0.0;
    for ep in 0..episodes {
        let mut obs = env.reset(derive_seed(run_seed, SeedStream::Eval, ep as u64));
        let mut success = false;
        loop {
            let a = mean_action(actor, &obs);
            let s = env.step(&a);
            total_return += s.reward;
            success |= s.info.inserted;
            obs = s.obs;
            if s.done {
                break;
            }
        }
        if success {
            successes += 1;
        }
    }
    (
        successes as f64 / episodes as f64,
        total_return / episodes as f64,
    )
}

fn save_ckpt(paths: Option<&CheckpointPaths>, best: bool, nets: &SacNets) -> Result<(), CheckpointError> {
    if let Some(p) = paths {
        let data = CheckpointData {
            actor: nets.actor.clone(),
            critic1: nets.critic1.clone(),
            critic2: nets.critic2.clone(),
            target1: nets.target1.clone(),
            target2: nets.target2.clone(),
            log_alpha: nets.log_alpha,
        };
        checkpoint::save(if best { &p.best } else { &p.latest }, &data)?;
    }
    Ok(())
}

/// Run the full training loop. Episodes are seeded from the run seed so the
/// whole procedure is a deterministic function of (env, hyper, seed).
/// Aborts with a persisted partial checkpoint if any loss becomes non-finite.
pub fn train<E: Environment>(
    env: &mut E,
    eval_env: &mut E,
    hyper: &SacHyper,
    seed: u64,
    ckpt: Option<&CheckpointPaths>,
    mut on_event: impl FnMut(&TrainEvent),
) -> Result<(SacNets, TrainResult), TrainError> {
    let obs_dim = env.obs_dim();
    let act_dim = env.act_dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut nets = SacNets::new(obs_dim, act_dim, &hyper.hidden, &mut rng);
    let mut opt = SacOptimizers::new(&nets, hyper.lr);
    let mut buffer = ReplayBuffer::new(hyper.buffer_capacity);

    let mut episode = 0usize;
    let mut obs = env.reset(derive_seed(seed, SeedStream::Train, 0));
    let mut ep_dense = 0.0;
    let mut ep_sparse = 0.0;
    let mut ep_align = false;
    let mut ep_insert = false;
    let mut ep_collision = false;
    let mut ep_len = 0usize;
    let mut best_success = f64::NEG_INFINITY;

    for step in 0..hyper.total_steps {
        let raw = if step < hyper.warmup {
            (0..act_dim).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>()
        } else {
            explore_action(&nets.actor, &obs, act_dim, &mut rng)
        };
        let s = env.step(&raw);
        // Time-limit terminations keep the bootstrap: only physical terminal
        // events cut the value recursion.
        let terminal = s.info.inserted || s.info.collision || s.info.non_finite;
        buffer.push(Transition {
            obs: obs.clone().into_boxed_slice(),
            action: raw.into_boxed_slice(),
            reward: s.reward,
            next_obs: s.obs.clone().into_boxed_slice(),
            done: terminal,
        });

        ep_dense += s.info.dense;
        ep_sparse += s.info.sparse;
        ep_align |= s.info.align_event;
        ep_insert |= s.info.inserted;
        ep_collision |= s.info.collision;
        ep_len += 1;
        obs = s.obs;

        if s.done {
            on_event(&TrainEvent::Episode {
                step: step + 1,
                episode,
                return_dense: ep_dense,
                return_sparse: ep_sparse,
                success_align: ep_align,
                success_insert: ep_insert,
                collision: ep_collision,
                episode_len: ep_len,
                sim_time: s.info.sim_time,
            });
            episode += 1;
            obs = env.reset(derive_seed(seed, SeedStream::Train, episode as u64));
            ep_dense = 0.0;
            ep_sparse = 0.0;
            ep_align = false;
            ep_insert = false;
            ep_collision = false;
            ep_len = 0;
        }

        if step >= hyper.warmup && buffer.len() >= hyper.batch {
            for _ in 0..hyper.updates_per_step {
                let batch = buffer.sample(hyper.batch, &mut rng);
                match update_step(
                    &mut nets,
                    &mut opt,
                    &batch,
                    hyper.gamma,
                    hyper.tau,
                    hyper.target_entropy,
                    &mut rng,
                ) {
                    Ok(_) => {}
                    Err(e) => {
                        save_ckpt(ckpt, false, &nets)?;
                        return Err(TrainError::NonFinite { step, source: e });
                    }
                }
            }
        }

        if hyper.eval_every > 0 && (step + 1) % hyper.eval_every == 0 {
            let (success_rate, mean_return) =
                evaluate(eval_env, &nets.actor, hyper.eval_episodes, seed);
            let best = success_rate > best_success
                || (success_rate == best_success && best_success < 0.0);
            if best {
                best_success = success_rate;
                save_ckpt(ckpt, true, &nets)?;
            }
            on_event(&TrainEvent::Eval { step: step + 1, success_rate, mean_return, best });
        }
    }

    save_ckpt(ckpt, false, &nets)?;
    if best_success == f64::NEG_INFINITY {
        // No evaluation ran; the final state is also the best known one.
        save_ckpt(ckpt, true, &nets)?;
    }

    let result = TrainResult {
        episodes: episode,
        steps: hyper.total_steps,
        best_success_rate: best_success.max(0.0),
        final_alpha: nets.alpha(),
    };
    Ok((nets, result))
}
