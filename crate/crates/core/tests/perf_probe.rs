//! Manual timing probe for the training hot path (ignored by default).
//! Run with: cargo test -p rmdp-core --test perf_probe -- --ignored --nocapture

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmdp_core::ppo::{actor_minibatch, critic_minibatch, ActorBundle, CriticBundle};
use rmdp_core::{Action, ActionSpec};

#[test]
#[ignore]
fn time_hot_path_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obs_dim = 26;
    let k = 25;
    let n = 25;
    let mb = 64;
    let actor = ActorBundle::new(obs_dim, &[64], k, ActionSpec::Discrete { n: 4 }, &mut rng);
    let critic = CriticBundle::new(obs_dim, &[64], k, n, &mut rng);
    let x = Array2::from_shape_fn((mb, obs_dim), |_| rng.gen_range(-1.0f32..1.0));
    let actions: Vec<Action> = (0..mb).map(|_| Action::Discrete(rng.gen_range(0..4))).collect();
    let action_refs: Vec<&Action> = actions.iter().collect();
    let old_lp: Vec<f64> = (0..mb).map(|_| -1.38).collect();
    let madv: Vec<f64> = (0..mb).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let targets = Array2::from_shape_fn((mb, n), |_| rng.gen_range(-1.0f32..1.0));

    let iters = 2000;

    let t = Instant::now();
    for _ in 0..iters {
        let cache = actor.net.trunk_forward(x.view());
        std::hint::black_box(&cache);
    }
    println!("trunk_forward (actor): {:>8.1} us/call", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let t = Instant::now();
    let mut grads = critic.net.grads();
    for _ in 0..iters {
        grads.zero();
        let loss = critic_minibatch(&critic, 0, x.view(), targets.view(), &mut grads).unwrap();
        std::hint::black_box(loss);
    }
    println!("critic_minibatch:      {:>8.1} us/call", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let t = Instant::now();
    let mut agrads = actor.net.grads();
    for _ in 0..iters {
        agrads.zero();
        let stats = actor_minibatch(
            &actor, 0, x.view(), &action_refs, &old_lp, &madv, 0.001, 0.2, &mut agrads, &mut [],
        )
        .unwrap();
        std::hint::black_box(stats.loss);
    }
    println!("actor_minibatch:       {:>8.1} us/call", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    // Raw tanh throughput for reference.
    let vals: Vec<f32> = (0..4096).map(|i| (i as f32) * 0.001 - 2.0).collect();
    let t = Instant::now();
    let mut acc = 0.0f32;
    for _ in 0..iters {
        for &v in &vals {
            acc += v.tanh();
        }
    }
    std::hint::black_box(acc);
    println!("4096 x f32::tanh:      {:>8.1} us/call", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    // Single-sample forward (rollout path).
    let obs: Vec<f32> = (0..obs_dim).map(|i| (i as f32) * 0.05 - 0.5).collect();
    let t = Instant::now();
    for _ in 0..(iters * 64) {
        let out = actor.net.forward1(&obs, 0).unwrap();
        std::hint::black_box(out[0]);
        let v = critic.net.forward1(&obs, 0).unwrap();
        std::hint::black_box(v[0]);
    }
    println!("rollout fwd pair:      {:>8.3} us/step", t.elapsed().as_secs_f64() * 1e6 / (iters * 64) as f64);
}

#[test]
#[ignore]
fn time_primitives() {
    use ndarray::linalg::general_mat_mul;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = Array2::from_shape_fn((64, 26), |_| rng.gen_range(-1.0f32..1.0));
    let w = Array2::from_shape_fn((26, 64), |_| rng.gen_range(-1.0f32..1.0));
    let mut c = Array2::<f32>::zeros((64, 64));
    let iters = 20000;
    let t = Instant::now();
    for _ in 0..iters {
        general_mat_mul(1.0, &a, &w, 0.0, &mut c);
        std::hint::black_box(&c);
    }
    println!("gemm 64x26x64:      {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let wt = Array2::from_shape_fn((64, 64), |_| rng.gen_range(-1.0f32..1.0));
    let mut d = Array2::<f32>::zeros((64, 64));
    let t = Instant::now();
    for _ in 0..iters {
        general_mat_mul(1.0, &a.t(), &c, 1.0, &mut ndarray::Array2::<f32>::zeros((26, 64)));
        general_mat_mul(1.0, &c, &wt.t(), 0.0, &mut d);
        std::hint::black_box(&d);
    }
    println!("bwd gemm pair:      {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let mut m = Array2::from_shape_fn((64, 64), |_| rng.gen_range(-2.0f32..2.0));
    let t = Instant::now();
    for _ in 0..iters {
        let mut mm = m.clone();
        mm.mapv_inplace(rmdp_core::nn::dense_test_hooks::fast_tanh_pub);
        std::hint::black_box(&mm);
        m = mm;
    }
    println!("mapv fast_tanh 4096:{:>8.2} us (incl clone)", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let t = Instant::now();
    for _ in 0..iters {
        let z = Array2::<f32>::zeros((64, 64));
        std::hint::black_box(&z);
    }
    println!("alloc+zero 64x64:   {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);
}

#[test]
#[ignore]
fn time_critic_stages() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let critic = CriticBundle::new(26, &[64], 25, 25, &mut rng);
    let x = Array2::from_shape_fn((64, 26), |_| rng.gen_range(-1.0f32..1.0));
    let targets = Array2::from_shape_fn((64, 25), |_| rng.gen_range(-1.0f32..1.0));
    let iters = 5000;

    let t = Instant::now();
    for _ in 0..iters {
        let cache = critic.net.trunk_forward(x.view());
        std::hint::black_box(&cache);
    }
    println!("  trunk_forward:   {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let cache = critic.net.trunk_forward(x.view());
    let t = Instant::now();
    for _ in 0..iters {
        let pred = critic.net.head_forward(&cache, 0).unwrap();
        std::hint::black_box(&pred);
    }
    println!("  head_forward:    {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let pred = critic.net.head_forward(&cache, 0).unwrap();
    let t = Instant::now();
    for _ in 0..iters {
        let lu = rmdp_core::ppo::critic_loss(pred.view(), targets.view());
        std::hint::black_box(&lu);
    }
    println!("  critic_loss:     {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let (_, upstream) = rmdp_core::ppo::critic_loss(pred.view(), targets.view());
    let mut grads = critic.net.grads();
    let t = Instant::now();
    for _ in 0..iters {
        grads.zero();
        critic.net.backward(&cache, &[(0, upstream.view())], &mut grads).unwrap();
        std::hint::black_box(&grads);
    }
    println!("  backward+zero:   {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);

    let t = Instant::now();
    for _ in 0..iters {
        grads.zero();
        std::hint::black_box(&grads);
    }
    println!("  grads.zero:      {:>8.2} us", t.elapsed().as_secs_f64() * 1e6 / iters as f64);
}
