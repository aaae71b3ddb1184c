//! Early-phase assignment dynamics probe (ignored by default).
//! Run: cargo test -p rmdp-core --test diag_early -- --ignored --nocapture

use rmdp_core::envs::{EnvConfig, ResourceGatheringConfig};
use rmdp_core::ppo::PpoConfig;
use rmdp_core::rmdp::RMdpSpec;
use rmdp_core::train::{run, Algorithm, TrainConfig};
use rmdp_core::EnvId;

#[test]
#[ignore]
fn early_assignment_dynamics() {
    let cfg = TrainConfig {
        spec: RMdpSpec::new(EnvId::ResourceGathering, 25, 3, 0.999, 100).unwrap(),
        env: EnvConfig::ResourceGathering(ResourceGatheringConfig::default()),
        ppo: PpoConfig { gamma: 0.999, ..Default::default() },
        transitions_per_policy: 2048 * 30,
        eval_every: 1,
        eval_episodes: 5,
        obs_norm: true,
        seed: 0,
    };
    let out = run(Algorithm::Em, &cfg).unwrap();
    for p in &out.history {
        println!(
            "round {:>3} sw {:>6.2} counts {:?}",
            p.round, p.social_welfare, p.rep_counts
        );
    }
    let labels = out.final_alpha.labels();
    for row in 0..5 {
        let line: Vec<String> = (0..5).map(|c| labels[row * 5 + c].to_string()).collect();
        println!("{}", line.join(" "));
    }
}
