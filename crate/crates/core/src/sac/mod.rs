//! From-scratch soft actor-critic: twin critics, squashed-Gaussian policy,
//! automatic entropy temperature, replay buffer, and checkpointing.

pub mod checkpoint;
pub mod mlp;
pub mod policy;
pub mod replay;
pub mod toy;
pub mod train;
pub mod update;

pub use checkpoint::{CheckpointData, CheckpointError};
pub use mlp::{polyak, Adam, AdamScalar, Layer, Mlp, MlpError, MlpGrads};
pub use policy::{mean_action, sample, sample_with_eps, PolicySample, LOG_STD_MAX, LOG_STD_MIN};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use toy::PointMassEnv;
pub use train::{evaluate, train, CheckpointPaths, SacHyper, TrainError, TrainEvent, TrainResult};
pub use update::{
    actor_loss_and_grads, critic_loss_and_grads, critic_targets, temperature_loss_and_grad,
    update_step, SacNets, SacOptimizers, UpdateError, UpdateStats,
};
