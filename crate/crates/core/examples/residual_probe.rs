// Scratch probe: constant-residual-action success rates vs nominal.
use residskill_core::env::{Action, AssemblyEnv, EnvParams, Environment};
use residskill_core::se3::Pose6;
use residskill_core::seed::{derive_seed, SeedStream};

fn run_const(name: &str, params: &EnvParams, action: Option<&Action>, episodes: usize) {
    let mut env = AssemblyEnv::new(params.clone());
    let mut inserts = 0;
    let mut collisions = 0;
    let mut time_sum = 0.0;
    for ep in 0..episodes {
        let seed = derive_seed(777, SeedStream::CompareEpisode, ep as u64);
        env.reset(seed);
        let (mut ins, mut col) = (false, false);
        let mut t = 0.0;
        loop {
            let s = match action {
                Some(a) => env.step_action(a),
                None => env.step_nominal(),
            };
            ins |= s.info.inserted;
            col |= s.info.collision;
            t = s.info.sim_time;
            if s.done {
                break;
            }
        }
        inserts += ins as usize;
        collisions += col as usize;
        if ins {
            time_sum += t;
        }
    }
    println!(
        "{name}: insert {inserts}/{episodes} collide {collisions}/{episodes} mean_t {:.2}",
        if inserts > 0 { time_sum / inserts as f64 } else { f64::NAN }
    );
}

fn main() {
    let episodes: usize = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(100);
    let mut params = EnvParams::default();
    params.goal_sigma_lin = 1.0e-3;

    let neutral = params.neutral_action();
    run_const("nominal        ", &params, None, episodes);
    run_const("neutral(action)", &params, Some(&neutral), episodes);

    let mut lat_comply = neutral.clone();
    lat_comply.sigma = [1.0, 1.0, 0.5, 0.0, 0.0, 0.0];
    lat_comply.kp_f = [8.0, 8.0, 4.0, 1.0, 1.0, 1.0];
    run_const("lat-comply     ", &params, Some(&lat_comply), episodes);

    let mut ang_comply = neutral.clone();
    ang_comply.sigma = [0.0, 0.0, 0.5, 0.8, 0.8, 0.2];
    ang_comply.kp_f = [4.0, 4.0, 4.0, 2.0, 2.0, 1.0];
    run_const("ang-comply     ", &params, Some(&ang_comply), episodes);

    let mut both = neutral.clone();
    both.sigma = [1.0, 1.0, 0.5, 0.8, 0.8, 0.2];
    both.kp_f = [8.0, 8.0, 4.0, 2.0, 2.0, 1.0];
    run_const("both-comply    ", &params, Some(&both), episodes);

    let mut soft_lat = neutral.clone();
    soft_lat.kp_x = [10.0, 10.0, 100.0, 15.0, 15.0, 15.0];
    run_const("soft-lateral   ", &params, Some(&soft_lat), episodes);

    let mut soft_push = soft_lat.clone();
    soft_push.sigma = [0.5, 0.5, 0.5, 0.0, 0.0, 0.0];
    soft_push.kp_f = [10.0, 10.0, 4.0, 1.0, 1.0, 1.0];
    run_const("soft+comply    ", &params, Some(&soft_push), episodes);

    let mut press = both.clone();
    press.goal_offset = Pose6::new(0.0, 0.0, -0.003, 0.0, 0.0, 0.0);
    run_const("comply+press   ", &params, Some(&press), episodes);
}
