//! Peg-in-hole assembly with encapsulated skills and residual reinforcement
//! learning: a quasi-static contact simulator, a hybrid force-motion
//! controller, a pre/post/invariant skill framework, and a from-scratch soft
//! actor-critic learner, plus the training/evaluation harness behind the CLI.

pub mod config;
pub mod control;
pub mod env;
pub mod harness;
pub mod metrics;
pub mod sac;
pub mod se3;
pub mod seed;
pub mod sim;
pub mod skill;

pub use control::{
    compose, derive_gains, nominal_command, residual_command, saturate, update_integral,
    CommandBounds, ControlCommand, ControlError, ForceIntegral, GainSet, SelectionMatrix,
};
pub use env::{
    decode_action, dense_reward, inject_noise, sparse_reward, Action, ActionBounds, AssemblyEnv,
    EnvParams, EnvStep, Environment, NoiseConfig, Observation, RewardWeights, StepInfo,
    ACTION_DIM, FRAME_DIM,
};
pub use se3::{norm_blocks, pose_error, wrap_angle, Pose6, Twist6, Wrench6};
pub use sim::{
    contact_query, contact_wrench, insertion_depth, sample_initial_pose, step, AdmittanceParams,
    ContactParams, ContactPoint, InitRanges, PegHoleGeometry, SimError, SimState,
};
pub use config::{ConfigError, RunConfig, SEED_ENV_VAR};
pub use harness::{
    run_compare, run_episode, run_eval, run_export, run_train, CompareReport, EpisodeOutcome,
    EpisodePolicy, EvalReport, ExportSummary, HarnessError, Overrides, TrainSummary,
};
pub use metrics::{
    export_curves, parse_metrics, read_metrics, window_mean, Curves, MetricsError, MetricsRow,
    MetricsWriter, METRICS_HEADER,
};
pub use seed::{derive_seed, SeedStream};
pub use skill::{
    advance_alpha, blend_goal, run_composite, BehaviorRef, BlendState, CompositeSkill, Condition,
    ExecutionStatus, FailReason, Skill, SkillError, SkillRun, WorldView,
};
