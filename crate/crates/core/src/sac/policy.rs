//! Tanh-squashed Gaussian policy head.
//!
//! The actor network outputs `[mean | log_std]`; log_std is clamped to
//! `[-20, 2]`. Actions are `a = tanh(mean + std * eps)` with the standard
//! change-of-variables correction on the log-density, computed through the
//! numerically stable identity
//! `ln(1 - tanh^2 u) = 2 (ln 2 - u - softplus(-2u))`.

use super::mlp::{ForwardCache, Mlp};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// One reparameterized sample with everything needed for the backward pass.
pub struct PolicySample {
    /// Squashed actions in `(-1, 1)`, shape (B, A).
    pub action: Array2<f64>,
    /// Per-sample log-density of the squashed action, shape (B,).
    pub log_prob: Array1<f64>,
    pub mean: Array2<f64>,
    /// Clamped log standard deviation.
    pub log_std: Array2<f64>,
    pub std: Array2<f64>,
    /// The standard-normal draws used by the reparameterization.
    pub eps: Array2<f64>,
    /// 1.0 where the raw log_std output was inside the clamp range.
    pub clamp_mask: Array2<f64>,
    cache: ForwardCache,
}

impl PolicySample {
    pub fn cache(&self) -> &ForwardCache {
        &self.cache
    }
}

/// Forward the actor and squash a reparameterized sample. `eps` must be
/// standard-normal draws of shape (B, A); passing them explicitly keeps the
/// computation a pure function of (network, obs, eps).
pub fn sample_with_eps(actor: &Mlp, obs: &Array2<f64>, eps: Array2<f64>) -> PolicySample {
    let act_dim = actor.output_dim() / 2;
    assert_eq!(eps.dim(), (obs.nrows(), act_dim));
    let cache = actor.forward_cached(obs).expect("observation width matches the actor");
    let out = cache.output();
    let mean = out.slice(s![.., ..act_dim]).to_owned();
    let raw_log_std = out.slice(s![.., act_dim..]).to_owned();
    let clamp_mask = raw_log_std.mapv(|v| if (LOG_STD_MIN..=LOG_STD_MAX).contains(&v) { 1.0 } else { 0.0 });
    let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let std = log_std.mapv(f64::exp);

    let u = &mean + &(&std * &eps);
    let action = u.mapv(f64::tanh);

    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut log_prob = Array1::zeros(obs.nrows());
    for b in 0..obs.nrows() {
        let mut lp = 0.0;
        for j in 0..act_dim {
            let e = eps[[b, j]];
            let uj = u[[b, j]];
            // Gaussian log-density of u plus the tanh Jacobian correction.
            lp += -0.5 * e * e - log_std[[b, j]] - half_ln_2pi;
            lp -= 2.0 * (std::f64::consts::LN_2 - uj - softplus(-2.0 * uj));
        }
        log_prob[b] = lp;
    }

    PolicySample { action, log_prob, mean, log_std, std, eps, clamp_mask, cache }
}

/// Draw fresh reparameterization noise and sample.
pub fn sample<R: Rng>(actor: &Mlp, obs: &Array2<f64>, rng: &mut R) -> PolicySample {
    let act_dim = actor.output_dim() / 2;
    let eps = Array2::from_shape_fn((obs.nrows(), act_dim), |_| StandardNormal.sample(rng));
    sample_with_eps(actor, obs, eps)
}

/// Deterministic evaluation action: `tanh(mean)`.
pub fn mean_action(actor: &Mlp, obs: &[f64]) -> Vec<f64> {
    let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
    let out = actor.forward(&x).expect("observation width matches the actor");
    let act_dim = actor.output_dim() / 2;
    (0..act_dim).map(|j| out[[0, j]].tanh()).collect()
}

/// Gradients of `sum_b coeff_logp[b] * log_prob[b] + sum_bj d_action[b,j] * action[b,j]`
/// with respect to the actor's raw outputs `[mean | log_std]`; the result is
/// ready to feed `Mlp::backward`.
pub fn backprop_to_actor_outputs(
    smp: &PolicySample,
    coeff_logp: &Array1<f64>,
    d_action: &Array2<f64>,
) -> Array2<f64> {
    let (batch, act_dim) = smp.action.dim();
    let mut d_out = Array2::zeros((batch, 2 * act_dim));
    for b in 0..batch {
        let cl = coeff_logp[b];
        for j in 0..act_dim {
            let a = smp.action[[b, j]];
            let sech2 = 1.0 - a * a;
            let se = smp.std[[b, j]] * smp.eps[[b, j]];
            // d log_prob / d mean = 2 tanh(u); d action / d mean = 1 - tanh^2.
            let d_mean = cl * 2.0 * a + d_action[[b, j]] * sech2;
            // Through u = mean + exp(log_std) eps, plus the -1 from the
            // Gaussian entropy term.
            let d_log_std = cl * (2.0 * a * se - 1.0) + d_action[[b, j]] * sech2 * se;
            d_out[[b, j]] = d_mean;
            d_out[[b, act_dim + j]] = d_log_std * smp.clamp_mask[[b, j]];
        }
    }
    d_out
}
