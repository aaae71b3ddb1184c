//! Diagnostic probe for gridworld specialization (ignored by default).
//! Run: cargo test -p rmdp-core --test diag_probe -- --ignored --nocapture

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmdp_core::envs::{EnvConfig, ResourceGatheringConfig};
use rmdp_core::ppo::PpoConfig;
use rmdp_core::rmdp::{Env, Policy, RMdpSpec};
use rmdp_core::train::{run, Algorithm, TrainConfig};
use rmdp_core::{Action, EnvId};

#[test]
#[ignore]
fn inspect_k3_policies() {
    let cfg = TrainConfig {
        spec: RMdpSpec::new(EnvId::ResourceGathering, 25, 3, 0.99, 100).unwrap(),
        env: EnvConfig::ResourceGathering(ResourceGatheringConfig::default()),
        ppo: PpoConfig::default(),
        transitions_per_policy: 400_000,
        eval_every: 50,
        eval_episodes: 10,
        obs_norm: true,
        seed: 0,
    };
    let out = run(Algorithm::Em, &cfg).unwrap();
    println!("final SW: {:.2}", out.social_welfare);
    let labels = out.final_alpha.labels();
    for row in 0..5 {
        let line: Vec<String> = (0..5).map(|c| labels[row * 5 + c].to_string()).collect();
        println!("{}", line.join(" "));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    for j in 0..3 {
        let policy = out.policies.eval_policy(j);
        for ep in 0..2 {
            let mut env = cfg.env.make();
            let mut obs = env.reset();
            let mut visited_path = vec![(2usize, 0usize)];
            let mut steps = 0;
            loop {
                let a = policy.act(&obs, &mut rng);
                let Action::Discrete(idx) = a else { panic!() };
                let outcome = env.step(&Action::Discrete(idx)).unwrap();
                steps += 1;
                // Decode position from the one-hot observation.
                let pos = outcome.obs[..25].iter().position(|&x| x == 1.0).unwrap();
                visited_path.push((pos / 5, pos % 5));
                if outcome.done || steps >= 100 {
                    break;
                }
                obs = outcome.obs;
            }
            let assigned: Vec<usize> =
                (0..25).filter(|&i| labels[i] == j).collect();
            let visited: std::collections::HashSet<(usize, usize)> =
                visited_path.iter().cloned().collect();
            let covered = assigned
                .iter()
                .filter(|&&i| visited.contains(&(i / 5, i % 5)))
                .count();
            println!(
                "rep {j} ep {ep}: T={steps} assigned={} covered={covered} path={:?}",
                assigned.len(),
                &visited_path[..visited_path.len().min(40)]
            );
        }
    }
    // Per-agent value table row mins/maxes.
    for j in 0..3 {
        let col: Vec<f64> = (0..25).map(|i| out.value_table[(i, j)]).collect();
        let avg_assigned: f64 = {
            let a: Vec<f64> = (0..25)
                .filter(|&i| labels[i] == j)
                .map(|i| col[i])
                .collect();
            a.iter().sum::<f64>() / a.len() as f64
        };
        println!("rep {j}: mean value over assigned agents = {avg_assigned:.1}");
    }
}
