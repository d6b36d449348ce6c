// Scratch probe: SAC learning curves on the point-mass and assembly envs.
use residskill_core::env::{AssemblyEnv, EnvParams};
use residskill_core::sac::{train, PointMassEnv, SacHyper, TrainEvent};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("toy");

    match which {
        "toy" => {
            let hyper = SacHyper {
                lr: 1e-4,
                batch: 400,
                total_steps: args.get(2).and_then(|v| v.parse().ok()).unwrap_or(20_000),
                warmup: 1000,
                hidden: vec![64, 64],
                target_entropy: -1.0,
                buffer_capacity: 100_000,
                eval_every: 0,
                gamma: args.get(3).and_then(|v| v.parse().ok()).unwrap_or(0.97),
                updates_per_step: args.get(4).and_then(|v| v.parse().ok()).unwrap_or(2),
                ..SacHyper::default()
            };
            let mut env = PointMassEnv::new();
            let mut eval_env = PointMassEnv::new();
            let t0 = Instant::now();
            let mut returns: Vec<f64> = Vec::new();
            train(&mut env, &mut eval_env, &hyper, 42, None, |e| {
                if let TrainEvent::Episode { return_dense, return_sparse, episode, .. } = e {
                    let r = return_dense + return_sparse;
                    returns.push(r);
                    if episode % 10 == 0 {
                        println!("ep {episode:4} return {r:7.1}  ({:.0}s)", t0.elapsed().as_secs_f64());
                    }
                }
            })
            .unwrap();
            let n = returns.len();
            let first: f64 = returns[..50.min(n)].iter().sum::<f64>() / 50.min(n) as f64;
            let last: f64 = returns[n.saturating_sub(50)..].iter().sum::<f64>() / 50.min(n) as f64;
            println!(
                "episodes {n}; first-50 mean {first:.1}; last-50 mean {last:.1}; ratio {:.2}; wall {:.0}s",
                last / first.max(1e-9),
                t0.elapsed().as_secs_f64()
            );
        }
        "asm" => {
            let steps = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(20_000);
            let hid: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(128);
            let batch: usize = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(128);
            let mut params = EnvParams::default();
            params.goal_sigma_lin = 1.0e-3;
            params.timeout = 5.0;
            let hyper = SacHyper {
                lr: 1e-4,
                batch,
                total_steps: steps,
                warmup: 1000,
                hidden: vec![hid, hid],
                target_entropy: -24.0,
                buffer_capacity: 200_000,
                eval_every: 5000,
                eval_episodes: 20,
                ..SacHyper::default()
            };
            let mut env = AssemblyEnv::new(params.clone());
            let mut eval_env = AssemblyEnv::new(params);
            let t0 = Instant::now();
            let mut succ_window: Vec<bool> = Vec::new();
            train(&mut env, &mut eval_env, &hyper, 42, None, |e| match e {
                TrainEvent::Episode { episode, success_insert, collision, episode_len, .. } => {
                    succ_window.push(*success_insert);
                    if succ_window.len() > 50 {
                        succ_window.remove(0);
                    }
                    if episode % 25 == 0 {
                        let rate = succ_window.iter().filter(|s| **s).count() as f64
                            / succ_window.len() as f64;
                        println!(
                            "ep {episode:5} len {episode_len:3} col {} train-succ(50) {rate:.2} ({:.0}s)",
                            *collision as u8,
                            t0.elapsed().as_secs_f64()
                        );
                    }
                }
                TrainEvent::Eval { step, success_rate, mean_return, best } => {
                    println!(
                        "EVAL step {step:6} success {success_rate:.2} return {mean_return:8.1} best {best} ({:.0}s)",
                        t0.elapsed().as_secs_f64()
                    );
                }
            })
            .unwrap();
            println!("wall {:.0}s", t0.elapsed().as_secs_f64());
        }
        "diag" => {
            let total = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(20_000);
            let lr = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1e-4);
            let gamma = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(0.97);
            let upd = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(2);
            diag(total, lr, gamma, upd);
        }
        other => eprintln!("unknown probe {other}"),
    }
}

// Instrumented manual loop for diagnosis (invoked with "diag").
#[allow(dead_code)]
fn diag(total: usize, lr: f64, gamma: f64, upd: usize) {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use residskill_core::env::Environment;
    use residskill_core::sac::*;
    use residskill_core::seed::{derive_seed, SeedStream};

    let mut env = PointMassEnv::new();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
    let mut nets = SacNets::new(2, 1, &[64, 64], &mut rng);
    let mut opt = SacOptimizers::new(&nets, lr);
    let mut buffer = ReplayBuffer::new(100_000);
    let mut obs = env.reset(derive_seed(42, SeedStream::Train, 0));
    let mut episode = 0u64;
    let mut ep_ret = 0.0;
    let warmup = 1000;
    for step in 0..total {
        let raw: Vec<f64> = if step < warmup {
            vec![rng.random_range(-1.0..=1.0)]
        } else {
            let x = Array2::from_shape_vec((1, 2), obs.clone()).unwrap();
            let smp = sample(&nets.actor, &x, &mut rng);
            vec![smp.action[[0, 0]]]
        };
        let s = env.step(&raw);
        buffer.push(Transition {
            obs: obs.clone().into_boxed_slice(),
            action: raw.into_boxed_slice(),
            reward: s.reward,
            next_obs: s.obs.clone().into_boxed_slice(),
            done: false,
        });
        ep_ret += s.reward;
        obs = s.obs;
        if s.done {
            episode += 1;
            obs = env.reset(derive_seed(42, SeedStream::Train, episode));
            ep_ret = 0.0;
        }
        let _ = ep_ret;
        if step >= warmup && buffer.len() >= 400 {
            for _ in 0..upd {
                let batch = buffer.sample(400, &mut rng);
                let stats = update_step(&mut nets, &mut opt, &batch, gamma, 0.005, -1.0, &mut rng).unwrap();
                if step % 2000 == 0 {
                    // Deterministic probe values across the state space.
                    let probe = Array2::from_shape_vec(
                        (3, 2),
                        vec![0.0, 0.0, 1.0, 0.0, -1.5, 0.5],
                    )
                    .unwrap();
                    let acts = (0..3)
                        .map(|i| {
                            let row = probe.row(i).to_vec();
                            mean_action(&nets.actor, &row)[0]
                        })
                        .collect::<Vec<_>>();
                    let q_at = |p: f64, a: f64| {
                        let x = Array2::from_shape_vec((1, 3), vec![p, 0.0, a]).unwrap();
                        nets.critic1.forward(&x).unwrap()[[0, 0]]
                    };
                    println!(
                        "step {step:6} a {:.3} q1l {:8.4} q2l {:8.4} al {:8.3} logp {:6.2} | pi(0)={:+.2} pi(1)={:+.2} pi(-1.5)={:+.2} | Q(0,0)={:6.1} Q(1,-1)={:6.1} Q(1,+1)={:6.1}",
                        stats.alpha, stats.q1_loss, stats.q2_loss, stats.actor_loss, stats.mean_logp,
                        acts[0], acts[1], acts[2], q_at(0.0, 0.0), q_at(1.0, -1.0), q_at(1.0, 1.0)
                    );
                    break;
                }
            }
        }
    }
    // Final deterministic eval.
    let (succ, ret) = evaluate(&mut env, &nets.actor, 20, 42);
    println!("deterministic eval: success {succ:.2} return {ret:.1}");
}
