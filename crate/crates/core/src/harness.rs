//! Entry points behind the CLI: training, checkpoint evaluation, the
//! matched-seed nominal-vs-residual comparison, and plot-data export.

use crate::config::{ConfigError, RunConfig};
use crate::env::{AssemblyEnv, Environment};
use crate::metrics::{read_metrics, MetricsError, MetricsRow, MetricsWriter};
use crate::sac::{
    checkpoint, mean_action, train, CheckpointError, CheckpointPaths, Mlp, TrainError, TrainEvent,
};
use crate::se3::Pose6;
use crate::seed::{derive_seed, SeedStream};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("runtime: {0}")]
    Runtime(String),
    #[error("runtime: {0}")]
    Metrics(#[from] MetricsError),
    #[error("runtime: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 runtime, 4 bad checkpoint.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Checkpoint(_) => 4,
            _ => 3,
        }
    }
}

impl From<TrainError> for HarnessError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Checkpoint(c) => HarnessError::Checkpoint(c),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

/// Optional command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &ov.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: usize,
    pub episodes: usize,
    pub best_success_rate: f64,
    pub metrics_path: PathBuf,
    pub latest_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
}

/// Train the residual policy on the assembly environment; writes the metrics
/// file, latest/best checkpoints, and a resolved-config snapshot.
pub fn run_train(config_path: &Path, ov: &Overrides) -> Result<TrainSummary, HarnessError> {
    let cfg = load_config(config_path, ov)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    cfg.snapshot(&cfg.output_dir.join("config.toml"))?;

    let params = cfg.env_params();
    let mut env = AssemblyEnv::new(params.clone());
    let mut eval_env = AssemblyEnv::new(params);
    let hyper = cfg.sac_hyper();

    let metrics_path = cfg.output_dir.join("metrics.csv");
    let mut metrics = MetricsWriter::create(&metrics_path)?;
    let eval_path = cfg.output_dir.join("eval.csv");
    let mut eval_file = std::fs::File::create(&eval_path)?;
    writeln!(eval_file, "step,success_rate,mean_return,best")?;

    let ckpt = CheckpointPaths {
        latest: cfg.output_dir.join("latest.rskl"),
        best: cfg.output_dir.join("best.rskl"),
    };

    let mut sim_clock = 0.0;
    let mut episodes = 0usize;
    let mut row_error: Option<MetricsError> = None;
    let (_, result) = train(&mut env, &mut eval_env, &hyper, cfg.seed, Some(&ckpt), |event| {
        match event {
            TrainEvent::Episode {
                step,
                episode,
                return_dense,
                return_sparse,
                success_align,
                success_insert,
                collision,
                episode_len,
                sim_time,
            } => {
                sim_clock += sim_time;
                episodes = episode + 1;
                let row = MetricsRow {
                    step: *step as u64,
                    episode: *episode as u64,
                    return_dense: *return_dense,
                    return_sparse: *return_sparse,
                    success_align: *success_align as u8,
                    success_insert: *success_insert as u8,
                    collision: *collision as u8,
                    episode_len: *episode_len as u64,
                    wallclock_s: sim_clock,
                };
                if let Err(e) = metrics.write_row(&row) {
                    row_error.get_or_insert(e);
                }
            }
            TrainEvent::Eval { step, success_rate, mean_return, best } => {
                let _ = writeln!(
                    eval_file,
                    "{step},{success_rate:.6},{mean_return:.6},{}",
                    *best as u8
                );
                let _ = eval_file.flush();
            }
        }
    })?;
    if let Some(e) = row_error {
        return Err(e.into());
    }

    Ok(TrainSummary {
        steps: result.steps,
        episodes,
        best_success_rate: result.best_success_rate,
        metrics_path,
        latest_checkpoint: ckpt.latest,
        best_checkpoint: ckpt.best,
    })
}

/// Which controller drives an evaluation episode.
pub enum EpisodePolicy<'a> {
    Nominal,
    Actor(&'a Mlp),
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeOutcome {
    pub dense: f64,
    pub sparse: f64,
    pub inserted: bool,
    pub aligned: bool,
    pub collision: bool,
    pub steps: usize,
    pub sim_time: f64,
    pub init_pose: Pose6,
}

/// Run one deterministic evaluation episode from a given seed.
pub fn run_episode(
    env: &mut AssemblyEnv,
    policy: &EpisodePolicy,
    episode_seed: u64,
) -> EpisodeOutcome {
    let mut obs = env.reset(episode_seed);
    let init_pose = env.sim_state().peg_pose;
    let mut out = EpisodeOutcome {
        dense: 0.0,
        sparse: 0.0,
        inserted: false,
        aligned: false,
        collision: false,
        steps: 0,
        sim_time: 0.0,
        init_pose,
    };
    loop {
        let step = match policy {
            EpisodePolicy::Nominal => env.step_nominal(),
            EpisodePolicy::Actor(actor) => {
                let raw = mean_action(actor, &obs);
                env.step(&raw)
            }
        };
        out.dense += step.info.dense;
        out.sparse += step.info.sparse;
        out.inserted |= step.info.inserted;
        out.aligned |= step.info.align_event;
        out.collision |= step.info.collision;
        out.steps += 1;
        out.sim_time = step.info.sim_time;
        obs = step.obs;
        if step.done {
            break;
        }
    }
    out
}

fn outcome_row(out: &EpisodeOutcome, episode: u64, step_acc: u64, clock: f64) -> MetricsRow {
    MetricsRow {
        step: step_acc,
        episode,
        return_dense: out.dense,
        return_sparse: out.sparse,
        success_align: out.aligned as u8,
        success_insert: out.inserted as u8,
        collision: out.collision as u8,
        episode_len: out.steps as u64,
        wallclock_s: clock,
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub episodes: usize,
    pub insert_rate: f64,
    pub align_rate: f64,
    pub mean_return: f64,
    /// Mean simulated completion time over successful episodes.
    pub mean_insert_time: Option<f64>,
    pub metrics_path: PathBuf,
}

impl EvalReport {
    pub fn render(&self) -> String {
        format!(
            "episodes: {}\ninsert success rate: {:.3}\nalign success rate: {:.3}\n\
             mean episode return: {:.3}\nmean completion time (s): {}\nrows: {}",
            self.episodes,
            self.insert_rate,
            self.align_rate,
            self.mean_return,
            self.mean_insert_time
                .map_or_else(|| "n/a".to_string(), |t| format!("{t:.3}")),
            self.metrics_path.display()
        )
    }
}

/// Evaluate a checkpointed policy over seeded randomized episodes.
pub fn run_eval(
    config_path: &Path,
    checkpoint_path: &Path,
    episodes: usize,
    ov: &Overrides,
) -> Result<EvalReport, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Runtime("eval requires at least one episode".into()));
    }
    let cfg = load_config(config_path, ov)?;
    let data = checkpoint::load(checkpoint_path)?;
    check_actor_compat(&cfg, &data.actor)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut env = AssemblyEnv::new(cfg.env_params());

    let metrics_path = cfg.output_dir.join("eval_metrics.csv");
    let mut writer = MetricsWriter::create(&metrics_path)?;

    let mut inserts = 0usize;
    let mut aligns = 0usize;
    let mut total_return = 0.0;
    let mut insert_time = 0.0;
    let mut steps_acc = 0u64;
    let mut clock = 0.0;
    for ep in 0..episodes {
        let seed = derive_seed(cfg.seed, SeedStream::Eval, ep as u64);
        let out = run_episode(&mut env, &EpisodePolicy::Actor(&data.actor), seed);
        steps_acc += out.steps as u64;
        clock += out.sim_time;
        writer.write_row(&outcome_row(&out, ep as u64, steps_acc, clock))?;
        if out.inserted {
            inserts += 1;
            insert_time += out.sim_time;
        }
        if out.aligned {
            aligns += 1;
        }
        total_return += out.dense + out.sparse;
    }

    Ok(EvalReport {
        episodes,
        insert_rate: inserts as f64 / episodes as f64,
        align_rate: aligns as f64 / episodes as f64,
        mean_return: total_return / episodes as f64,
        mean_insert_time: (inserts > 0).then(|| insert_time / inserts as f64),
        metrics_path,
    })
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub episodes: usize,
    pub nominal_successes: usize,
    pub residual_successes: usize,
    pub nominal_rate: f64,
    pub residual_rate: f64,
    /// residual rate minus nominal rate.
    pub difference: f64,
    /// 95% normal-approximation confidence interval on the difference.
    pub ci95: (f64, f64),
}

impl CompareReport {
    pub fn render(&self) -> String {
        format!(
            "paired episodes: {}\nnominal insert successes: {} ({:.3})\n\
             residual insert successes: {} ({:.3})\ndifference (residual - nominal): {:.3}\n\
             95% CI on difference: [{:.3}, {:.3}]",
            self.episodes,
            self.nominal_successes,
            self.nominal_rate,
            self.residual_successes,
            self.residual_rate,
            self.difference,
            self.ci95.0,
            self.ci95.1
        )
    }
}

/// Matched-seed comparison: each episode pair shares its randomized initial
/// pose and hole-pose estimate; one arm runs the pure nominal controller, the
/// other the checkpointed residual policy.
pub fn run_compare(
    config_path: &Path,
    checkpoint_path: &Path,
    episodes: usize,
    ov: &Overrides,
) -> Result<CompareReport, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Runtime("compare requires at least one episode".into()));
    }
    let cfg = load_config(config_path, ov)?;
    let data = checkpoint::load(checkpoint_path)?;
    check_actor_compat(&cfg, &data.actor)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut env = AssemblyEnv::new(cfg.env_params());

    let mut nominal_writer = MetricsWriter::create(&cfg.output_dir.join("compare_nominal.csv"))?;
    let mut residual_writer = MetricsWriter::create(&cfg.output_dir.join("compare_residual.csv"))?;

    let mut nom_successes = 0usize;
    let mut res_successes = 0usize;
    let mut nom_steps = 0u64;
    let mut res_steps = 0u64;
    let mut nom_clock = 0.0;
    let mut res_clock = 0.0;
    for ep in 0..episodes {
        let seed = derive_seed(cfg.seed, SeedStream::CompareEpisode, ep as u64);
        let nom = run_episode(&mut env, &EpisodePolicy::Nominal, seed);
        let res = run_episode(&mut env, &EpisodePolicy::Actor(&data.actor), seed);
        if nom.init_pose != res.init_pose {
            return Err(HarnessError::Runtime(format!(
                "seed pairing broken at episode {ep}: initial poses differ"
            )));
        }
        nom_steps += nom.steps as u64;
        res_steps += res.steps as u64;
        nom_clock += nom.sim_time;
        res_clock += res.sim_time;
        nominal_writer.write_row(&outcome_row(&nom, ep as u64, nom_steps, nom_clock))?;
        residual_writer.write_row(&outcome_row(&res, ep as u64, res_steps, res_clock))?;
        nom_successes += nom.inserted as usize;
        res_successes += res.inserted as usize;
    }

    let n = episodes as f64;
    let p_nom = nom_successes as f64 / n;
    let p_res = res_successes as f64 / n;
    let diff = p_res - p_nom;
    let se = (p_nom * (1.0 - p_nom) / n + p_res * (1.0 - p_res) / n).sqrt();
    let ci = (diff - 1.96 * se, diff + 1.96 * se);

    Ok(CompareReport {
        episodes,
        nominal_successes: nom_successes,
        residual_successes: res_successes,
        nominal_rate: p_nom,
        residual_rate: p_res,
        difference: diff,
        ci95: ci,
    })
}

fn check_actor_compat(cfg: &RunConfig, actor: &Mlp) -> Result<(), HarnessError> {
    let params = cfg.env_params();
    let env = AssemblyEnv::new(params);
    let expected_in = env.obs_dim();
    let expected_out = 2 * env.act_dim();
    if actor.input_dim() != expected_in || actor.output_dim() != expected_out {
        return Err(HarnessError::Checkpoint(CheckpointError::BadShape(format!(
            "actor is {}x{} but the configured environment needs {}x{}",
            actor.input_dim(),
            actor.output_dim(),
            expected_in,
            expected_out
        ))));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExportSummary {
    pub rows: usize,
    pub return_curve: PathBuf,
    pub success_curve: PathBuf,
}

/// Smooth the metrics series with a trailing window mean and write plot data.
pub fn run_export(
    metrics_path: &Path,
    window: usize,
    out_dir: Option<&Path>,
) -> Result<ExportSummary, HarnessError> {
    if window == 0 {
        return Err(HarnessError::Runtime("window must be at least 1".into()));
    }
    let rows = read_metrics(metrics_path)?;
    let curves = crate::metrics::export_curves(&rows, window);
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| metrics_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;

    let return_curve = dir.join("return_curve.csv");
    let mut f = std::fs::File::create(&return_curve)?;
    writeln!(f, "episode,return_smoothed")?;
    for (x, y) in &curves.returns {
        writeln!(f, "{x},{y:.9}")?;
    }

    let success_curve = dir.join("success_curve.csv");
    let mut f = std::fs::File::create(&success_curve)?;
    writeln!(f, "episode,insert_rate_smoothed")?;
    for (x, y) in &curves.success {
        writeln!(f, "{x},{y:.9}")?;
    }

    Ok(ExportSummary { rows: rows.len(), return_curve, success_curve })
}
