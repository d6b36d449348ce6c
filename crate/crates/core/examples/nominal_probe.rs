// Scratch probe for tuning: nominal-controller behavior across scenarios.
use residskill_core::env::{AssemblyEnv, EnvParams, Environment, NoiseConfig};
use residskill_core::harness::{run_episode, EpisodePolicy};
use residskill_core::seed::{derive_seed, SeedStream};
use residskill_core::sim::InitRanges;

fn stats(name: &str, params: EnvParams, episodes: usize) {
    let mut env = AssemblyEnv::new(params);
    let mut inserts = 0;
    let mut aligns = 0;
    let mut collisions = 0;
    let mut time_sum = 0.0;
    for ep in 0..episodes {
        let seed = derive_seed(1234, SeedStream::CompareEpisode, ep as u64);
        let out = run_episode(&mut env, &EpisodePolicy::Nominal, seed);
        inserts += out.inserted as usize;
        aligns += out.aligned as usize;
        collisions += out.collision as usize;
        if out.inserted {
            time_sum += out.sim_time;
        }
    }
    println!(
        "{name}: insert {}/{episodes}  align {}/{episodes}  collide {}/{episodes}  mean_t {:.2}s",
        inserts,
        aligns,
        collisions,
        if inserts > 0 { time_sum / inserts as f64 } else { f64::NAN }
    );
}

fn trace_one(params: EnvParams, seed: u64) {
    let mut env = AssemblyEnv::new(params.clone());
    env.reset(seed);
    println!(
        "start pose: {:?}",
        env.sim_state().peg_pose.to_array().map(|v| (v * 1e4).round() / 1e4)
    );
    for k in 0..(params.timeout * params.policy_hz) as usize {
        let s = env.step_nominal();
        if k % 20 == 0 || s.done {
            let st = env.sim_state();
            println!(
                "t={:5.2} z={:7.4} x={:7.4} y={:7.4} a={:6.3} b={:6.3} depth={:6.4} |F|={:6.2} fz={:6.2} done={} ins={} col={}",
                st.time,
                st.peg_pose.z,
                st.peg_pose.x,
                st.peg_pose.y,
                st.peg_pose.alpha,
                st.peg_pose.beta,
                s.info.depth,
                st.last_wrench.force_norm(),
                st.last_wrench.fz,
                s.done,
                s.info.inserted,
                s.info.collision
            );
        }
        if s.done {
            break;
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(100);

    // Criterion-9 style: zero misalignment, no goal noise.
    let mut perfect = EnvParams::default();
    perfect.init = InitRanges {
        lateral_offset: 0.0,
        height_lo: 0.01,
        height_hi: 0.01,
        incline_lo: 0.0,
        incline_hi: 0.0,
        yaw: 0.0,
    };
    perfect.goal_sigma_lin = 0.0;
    perfect.goal_sigma_ang = 0.0;
    perfect.noise = NoiseConfig { sigma_pose: 0.0, sigma_twist: 0.0, sigma_wrench: 0.0 };
    perfect.timeout = 10.0;
    stats("perfect ", perfect.clone(), episodes);

    // Perfect start but with goal estimate noise only.
    let mut goal_noise = perfect.clone();
    goal_noise.goal_sigma_lin = 5e-4;
    goal_noise.goal_sigma_ang = 0.01;
    stats("goalnoise", goal_noise, episodes);

    // Full criterion-8 conditions (defaults).
    let full = EnvParams::default();
    stats("full     ", full.clone(), episodes);

    for sigma_lin in [0.75e-3, 1.0e-3, 1.25e-3, 1.5e-3] {
        let mut p = EnvParams::default();
        p.goal_sigma_lin = sigma_lin;
        stats(&format!("sl={:.2}mm", sigma_lin * 1e3), p, episodes);
    }

    if args.iter().any(|a| a == "--trace") {
        println!("--- trace perfect ---");
        trace_one(perfect, derive_seed(1234, SeedStream::CompareEpisode, 0));
        println!("--- trace full ---");
        trace_one(full, derive_seed(1234, SeedStream::CompareEpisode, 0));
    }
}
