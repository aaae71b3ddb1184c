//! Fast verification suite: numerical-kernel oracles and the tabular
//! convergence checks, reported as machine-readable pass/fail lines.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use rmdp_core::assign::{initial_hard_assignment, soft_logits_grad, AssignmentLogits};
use rmdp_core::baselines::kmeans_with_trace;
use rmdp_core::envs::{rg_optimal_oracle, vt_kernel, vt_partition_oracle, ResourceGatheringConfig};
use rmdp_core::nn::{orthogonal_init, DenseNet};
use rmdp_core::ppo::{actor_minibatch, compute_gae, critic_minibatch, ActorBundle, CriticBundle};
use rmdp_core::tabular::{
    em_solve, exact_e_step_sticky, exact_m_step, initial_value, load_instance, policy_evaluation,
    random_instance, weighted_reward, TabularPolicy,
};
use rmdp_core::train::stream_rng;
use rmdp_core::{Action, ActionSpec, Result};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn from_measure(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            threshold,
            pass: measured.is_finite() && measured <= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<28} measured={:<12.3e} threshold={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

/// Runs the whole suite; `instance` optionally adds a monotonicity check for
/// one instance file.
pub fn run_verify(instance: Option<&Path>) -> Result<Vec<CheckResult>> {
    let mut results = vec![
        gae_oracle_check(),
        actor_gradient_check(0.0),
        gaussian_actor_gradient_check(),
        critic_gradient_check(),
        logits_gradient_check(),
        orthogonal_init_check(),
        soft_alpha_rows_check(),
        lloyd_inertia_check(),
        lemma1_identity_check(),
        tabular_theorem_check(),
        rg_oracle_check(),
        vt_oracle_check(),
    ];
    if let Some(path) = instance {
        results.push(instance_monotonicity_check(path)?);
    }
    Ok(results)
}

/// GAE against an independent direct-sum oracle.
pub fn gae_oracle_check() -> CheckResult {
    let mut rng = stream_rng(101, 0);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let t_max = rng.gen_range(1..60);
        let rewards: Vec<f64> = (0..t_max).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let values: Vec<f64> = (0..t_max).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..t_max).map(|_| rng.gen_bool(0.12)).collect();
        let bootstrap = rng.gen_range(-2.0..2.0);
        let (gamma, lambda) = (0.99, 0.95);
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..t_max {
            // Direct exponentially-weighted sum of TD residuals.
            let mut expect = 0.0;
            let mut weight = 1.0;
            for l in t..t_max {
                let next_v = if l + 1 < t_max { values[l + 1] } else { bootstrap };
                let nt = if dones[l] { 0.0 } else { 1.0 };
                expect += weight * (rewards[l] + gamma * next_v * nt - values[l]);
                if dones[l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            worst = worst.max((adv[t] - expect).abs());
        }
    }
    CheckResult::from_measure("gae_oracle", worst, 1e-9)
}

/// Straight-line f64 re-evaluation of a dense net.
struct F64Net {
    trunk: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    heads: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl F64Net {
    fn from_net(net: &DenseNet) -> Self {
        let conv = |l: &rmdp_core::nn::Linear| {
            let w = (0..l.w.nrows())
                .map(|i| (0..l.w.ncols()).map(|o| l.w[(i, o)] as f64).collect())
                .collect();
            let b = l.b.iter().map(|&x| x as f64).collect();
            (w, b)
        };
        Self {
            trunk: net.trunk.iter().map(conv).collect(),
            heads: net.heads.iter().map(conv).collect(),
        }
    }

    fn forward(&self, obs: &[f64], head: usize) -> Vec<f64> {
        let mut cur = obs.to_vec();
        for (w, b) in &self.trunk {
            let mut next = b.clone();
            for (i, &x) in cur.iter().enumerate() {
                for (o, n) in next.iter_mut().enumerate() {
                    *n += x * w[i][o];
                }
            }
            for n in next.iter_mut() {
                *n = n.tanh();
            }
            cur = next;
        }
        let (w, b) = &self.heads[head];
        let mut out = b.clone();
        for (i, &x) in cur.iter().enumerate() {
            for (o, n) in out.iter_mut().enumerate() {
                *n += x * w[i][o];
            }
        }
        out
    }

    /// Flat list of mutable parameter locations, matching the order of
    /// `DenseNet::param_blocks` (trunk then heads, weights then bias).
    fn flat_params(&mut self) -> Vec<*mut f64> {
        let mut out: Vec<*mut f64> = Vec::new();
        for (w, b) in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            for row in w.iter_mut() {
                for x in row.iter_mut() {
                    out.push(x as *mut f64);
                }
            }
            for x in b.iter_mut() {
                out.push(x as *mut f64);
            }
        }
        out
    }
}

fn central_diff(param: *mut f64, h: f64, mut eval: impl FnMut() -> f64) -> f64 {
    // The pointers index disjoint fields of a locally-owned F64Net.
    unsafe {
        let orig = *param;
        *param = orig + h;
        let up = eval();
        *param = orig - h;
        let down = eval();
        *param = orig;
        (up - down) / (2.0 * h)
    }
}

fn max_rel_err(analytic: &[f64], reference: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &r)| (a - r).abs() / a.abs().max(r.abs()).max(1e-2))
        .fold(0.0, f64::max)
}

fn clip64(rho: f64, eps: f64) -> f64 {
    rho.clamp(1.0 - eps, 1.0 + eps)
}

/// Categorical actor-loss gradients against central finite differences on an
/// independent f64 evaluation. `corrupt` offsets the first analytic gradient
/// (used by the mutation test to confirm the check can fail).
pub fn actor_gradient_check(corrupt: f64) -> CheckResult {
    let mut rng = stream_rng(102, 0);
    let batch = 8;
    let obs_dim = 4;
    let actions_n = 4;
    let actor = ActorBundle::new(obs_dim, &[8], 2, ActionSpec::Discrete { n: actions_n }, &mut rng);
    let head = 1;
    let x = Array2::from_shape_fn((batch, obs_dim), |_| rng.gen_range(-1.5f64..1.5) as f32 * 0.7);
    let actions: Vec<Action> =
        (0..batch).map(|_| Action::Discrete(rng.gen_range(0..actions_n))).collect();
    let action_refs: Vec<&Action> = actions.iter().collect();
    let old_lp: Vec<f64> = (0..batch).map(|_| -(actions_n as f64).ln() + rng.gen_range(-0.2..0.2)).collect();
    let madv: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let (entropy_coef, clip_eps) = (0.001, 0.2);

    let mut grads = actor.net.grads();
    actor_minibatch(
        &actor,
        head,
        x.view(),
        &action_refs,
        &old_lp,
        &madv,
        entropy_coef,
        clip_eps,
        &mut grads,
        &mut [],
    )
    .expect("actor pass");
    let mut analytic: Vec<f64> = grads.blocks().concat().iter().map(|&g| g as f64).collect();
    if !analytic.is_empty() {
        analytic[0] += corrupt;
    }

    let mut f64net = F64Net::from_net(&actor.net);
    let obs_rows: Vec<Vec<f64>> = (0..batch)
        .map(|t| x.row(t).iter().map(|&v| v as f64).collect())
        .collect();
    let loss = |net: &F64Net| -> f64 {
        let mut total = 0.0;
        for t in 0..batch {
            let logits = net.forward(&obs_rows[t], head);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
            let Action::Discrete(a) = actions[t] else { unreachable!() };
            let lp = logits[a] - log_z;
            let rho = (lp - old_lp[t]).exp();
            let surr = (rho * madv[t]).min(clip64(rho, clip_eps) * madv[t]);
            let entropy: f64 = logits
                .iter()
                .map(|l| {
                    let p = (l - log_z).exp();
                    if p > 0.0 {
                        -p * p.ln()
                    } else {
                        0.0
                    }
                })
                .sum();
            total += -surr - entropy_coef * entropy;
        }
        total / batch as f64
    };

    let params = f64net.flat_params();
    let mut fd = Vec::with_capacity(params.len());
    for &p in &params {
        fd.push(central_diff(p, 1e-4, || loss(&f64net)));
    }
    CheckResult::from_measure("actor_grad_fd", max_rel_err(&analytic, &fd), 1e-3)
}

/// Gaussian actor: net means plus state-independent log-std parameters.
pub fn gaussian_actor_gradient_check() -> CheckResult {
    let mut rng = stream_rng(103, 0);
    let batch = 8;
    let obs_dim = 3;
    let dim = 2;
    let mut actor = ActorBundle::new(obs_dim, &[6], 2, ActionSpec::Continuous { dim }, &mut rng);
    for ls in actor.log_std.iter_mut() {
        ls.mapv_inplace(|_| rng.gen_range(-0.8..0.4));
    }
    let head = 0;
    let x = Array2::from_shape_fn((batch, obs_dim), |_| rng.gen_range(-1.5f64..1.5) as f32 * 0.5);
    let actions: Vec<Action> = (0..batch)
        .map(|_| Action::Continuous((0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect()))
        .collect();
    let action_refs: Vec<&Action> = actions.iter().collect();
    let old_lp: Vec<f64> = (0..batch).map(|_| rng.gen_range(-3.0..-1.0)).collect();
    let madv: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let (entropy_coef, clip_eps) = (0.001, 0.2);

    let mut grads = actor.net.grads();
    let mut ls_grads: Vec<ndarray::Array1<f32>> =
        actor.log_std.iter().map(|l| ndarray::Array1::zeros(l.len())).collect();
    actor_minibatch(
        &actor,
        head,
        x.view(),
        &action_refs,
        &old_lp,
        &madv,
        entropy_coef,
        clip_eps,
        &mut grads,
        &mut ls_grads,
    )
    .expect("actor pass");
    let mut analytic: Vec<f64> = grads.blocks().concat().iter().map(|&g| g as f64).collect();
    analytic.extend(ls_grads[head].iter().map(|&g| g as f64));

    let mut f64net = F64Net::from_net(&actor.net);
    let mut ls64: Vec<f64> = actor.log_std[head].iter().map(|&x| x as f64).collect();
    let obs_rows: Vec<Vec<f64>> = (0..batch)
        .map(|t| x.row(t).iter().map(|&v| v as f64).collect())
        .collect();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let loss = |net: &F64Net, ls: &[f64]| -> f64 {
        let mut total = 0.0;
        for t in 0..batch {
            let mean = net.forward(&obs_rows[t], head);
            let Action::Continuous(a) = &actions[t] else { unreachable!() };
            let mut lp = 0.0;
            let mut entropy = 0.0;
            for d in 0..dim {
                let sigma = ls[d].exp();
                let z = (a[d] - mean[d]) / sigma;
                lp += -0.5 * z * z - ls[d] - 0.5 * ln_2pi;
                entropy += 0.5 * (ln_2pi + 1.0) + ls[d];
            }
            let rho = (lp - old_lp[t]).exp();
            let surr = (rho * madv[t]).min(clip64(rho, clip_eps) * madv[t]);
            total += -surr - entropy_coef * entropy;
        }
        total / batch as f64
    };

    let params = f64net.flat_params();
    let mut fd = Vec::with_capacity(params.len() + dim);
    for &p in &params {
        fd.push(central_diff(p, 1e-4, || loss(&f64net, &ls64)));
    }
    for d in 0..dim {
        let h = 1e-4;
        let orig = ls64[d];
        ls64[d] = orig + h;
        let up = loss(&f64net, &ls64);
        ls64[d] = orig - h;
        let down = loss(&f64net, &ls64);
        ls64[d] = orig;
        fd.push((up - down) / (2.0 * h));
    }
    // Other heads' log-std grads are zero in both views; compare only the
    // net parameters plus the active head's log-std.
    CheckResult::from_measure("gaussian_actor_grad_fd", max_rel_err(&analytic, &fd), 1e-3)
}

pub fn critic_gradient_check() -> CheckResult {
    let mut rng = stream_rng(104, 0);
    let batch = 8;
    let obs_dim = 5;
    let n_agents = 3;
    let critic = CriticBundle::new(obs_dim, &[8], 2, n_agents, &mut rng);
    let head = 0;
    let x = Array2::from_shape_fn((batch, obs_dim), |_| rng.gen_range(-1.5f64..1.5) as f32 * 0.6);
    let targets =
        Array2::from_shape_fn((batch, n_agents), |_| rng.gen_range(-2.0f64..2.0) as f32);

    let mut grads = critic.net.grads();
    critic_minibatch(&critic, head, x.view(), targets.view(), &mut grads).expect("critic pass");
    let analytic: Vec<f64> = grads.blocks().concat().iter().map(|&g| g as f64).collect();

    let mut f64net = F64Net::from_net(&critic.net);
    let obs_rows: Vec<Vec<f64>> = (0..batch)
        .map(|t| x.row(t).iter().map(|&v| v as f64).collect())
        .collect();
    let loss = |net: &F64Net| -> f64 {
        let mut total = 0.0;
        for t in 0..batch {
            let pred = net.forward(&obs_rows[t], head);
            for i in 0..n_agents {
                let diff = pred[i] - targets[(t, i)] as f64;
                total += diff * diff;
            }
        }
        total / (batch * n_agents) as f64
    };
    let params = f64net.flat_params();
    let mut fd = Vec::with_capacity(params.len());
    for &p in &params {
        fd.push(central_diff(p, 1e-4, || loss(&f64net)));
    }
    CheckResult::from_measure("critic_grad_fd", max_rel_err(&analytic, &fd), 1e-3)
}

/// Soft-assignment loss gradient against finite differences on the exact
/// f64 objective.
pub fn logits_gradient_check() -> CheckResult {
    let mut rng = stream_rng(105, 0);
    let (n, k) = (4, 3);
    let mut logits = AssignmentLogits::new(n, k);
    let psi0 = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
    logits.set_psi(psi0.clone());
    let scores = Array2::from_shape_fn((n, k), |_| rng.gen_range(-2.0..2.0));
    let analytic = soft_logits_grad(&logits.soft_alpha(), scores.view()).unwrap();

    let loss = |psi: &Array2<f64>| -> f64 {
        let mut l = AssignmentLogits::new(n, k);
        l.set_psi(psi.clone());
        let alpha = l.soft_alpha();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..k {
                total += alpha.get(i, j) * scores[(i, j)];
            }
        }
        -total
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..k {
            let h = 1e-5;
            let mut up = psi0.clone();
            up[(i, j)] += h;
            let mut dn = psi0.clone();
            dn[(i, j)] -= h;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
            let a = analytic[(i, j)];
            worst = worst.max((fd - a).abs() / fd.abs().max(a.abs()).max(1e-2));
        }
    }
    CheckResult::from_measure("logits_grad_fd", worst, 1e-3)
}

pub fn orthogonal_init_check() -> CheckResult {
    let mut rng = stream_rng(106, 0);
    let mut worst = 0.0f64;
    for &(rows, cols, gain) in
        &[(8usize, 8usize, 1.0f64), (64, 25, 1.0), (25, 64, 0.01), (64, 4, 1.41421356)]
    {
        let w = orthogonal_init(rows, cols, gain, &mut rng);
        let wf = w.mapv(|x| x as f64);
        let gram = if rows <= cols { wf.dot(&wf.t()) } else { wf.t().dot(&wf) };
        let m = gram.nrows();
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { gain * gain } else { 0.0 };
                worst = worst.max((gram[(i, j)] - expect).abs());
            }
        }
    }
    CheckResult::from_measure("orthogonal_init", worst, 1e-4)
}

pub fn soft_alpha_rows_check() -> CheckResult {
    let mut rng = stream_rng(107, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, k) = (rng.gen_range(1..10), rng.gen_range(1..6));
        let psi = Array2::from_shape_fn((n, k), |_| rng.gen_range(-40.0..40.0));
        let mut logits = AssignmentLogits::new(n, k);
        logits.set_psi(psi);
        let alpha = logits.soft_alpha();
        for i in 0..n {
            let sum: f64 = (0..k).map(|j| alpha.get(i, j)).sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    CheckResult::from_measure("soft_alpha_rows", worst, 1e-6)
}

/// Lloyd inertia must never increase across iterations, on 100 random
/// datasets.
pub fn lloyd_inertia_check() -> CheckResult {
    let mut rng = stream_rng(108, 0);
    let mut worst_increase = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(5..40);
        let d = rng.gen_range(1..5);
        let k = rng.gen_range(1..=n.min(6));
        let points = Array2::from_shape_fn((n, d), |_| rng.gen_range(-5.0..5.0));
        let (_, trace) = kmeans_with_trace(points.view(), k, &mut rng).expect("kmeans");
        for w in trace.windows(2) {
            worst_increase = worst_increase.max(w[1] - w[0]);
        }
    }
    CheckResult::from_measure("lloyd_inertia_monotone", worst_increase, 1e-9)
}

/// The scalarized value function equals the assignment-weighted sum of
/// per-agent values (100 random cases).
pub fn lemma1_identity_check() -> CheckResult {
    let mut rng = stream_rng(109, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (rmdp, _) = random_instance(&mut rng, 6, 3, 8, 3);
        let actions: Vec<usize> =
            (0..rmdp.n_states).map(|_| rng.gen_range(0..rmdp.n_actions)).collect();
        let policy = TabularPolicy::deterministic(&actions, rmdp.n_actions);
        let column: Vec<f64> = (0..rmdp.n_agents).map(|_| rng.gen_range(0.0..1.0)).collect();
        let joint =
            policy_evaluation(&rmdp, &policy, &weighted_reward(&rmdp, &column)).unwrap();
        let mut weighted_sum = 0.0;
        for (i, &w) in column.iter().enumerate() {
            let v = policy_evaluation(&rmdp, &policy, &rmdp.agent_reward(i)).unwrap();
            weighted_sum += w * initial_value(&rmdp, &v);
        }
        worst = worst.max((initial_value(&rmdp, &joint) - weighted_sum).abs());
    }
    CheckResult::from_measure("lemma1_identity", worst, 1e-9)
}

/// 200 seeded instances: monotone welfare trace per half-step, convergence
/// within 50 iterations, and a fixed point under one more alternation.
pub fn tabular_theorem_check() -> CheckResult {
    let mut rng = stream_rng(110, 0);
    let mut violations = 0u32;
    for trial in 0..200 {
        let (rmdp, k) = random_instance(&mut rng, 6, 3, 8, 3);
        let init = initial_hard_assignment(rmdp.n_agents, k, &mut rng);
        match em_solve(&rmdp, &init, 50, &mut rng) {
            Err(e) => {
                eprintln!("tabular trial {trial}: solve failed: {e}");
                violations += 1;
            }
            Ok(out) => {
                if out.sw_trace.windows(2).any(|w| w[1] < w[0] - 1e-9) {
                    eprintln!("tabular trial {trial}: non-monotone trace");
                    violations += 1;
                    continue;
                }
                let (policies2, alpha2) = exact_m_step(&rmdp, &out.alpha, Some(&mut rng)).unwrap();
                let alpha3 = exact_e_step_sticky(&rmdp, &policies2, &alpha2).unwrap();
                if alpha2 != out.alpha || policies2 != out.policies || alpha3 != out.alpha {
                    eprintln!("tabular trial {trial}: not a fixed point");
                    violations += 1;
                }
            }
        }
    }
    CheckResult::from_measure("tabular_theorem_suite", violations as f64, 0.0)
}

pub fn rg_oracle_check() -> CheckResult {
    let (_, sw) = rg_optimal_oracle(&ResourceGatheringConfig::default());
    let (_, sw_center) = rg_optimal_oracle(&ResourceGatheringConfig {
        start_cell: (2, 2),
        ..Default::default()
    });
    let measured = (sw - 93.52).abs().max((sw_center - 95.12).abs());
    CheckResult::from_measure("rg_oracle", measured, 1e-9)
}

pub fn vt_oracle_check() -> CheckResult {
    let b = 2.5;
    let (single, _) = vt_partition_oracle(&[0.73 * b], 1, b).unwrap();
    let mut worst = (single - 100.0).abs();
    // Brute force over contiguous splits for a 6-agent, k = 2 case.
    let mut rng = stream_rng(111, 0);
    let mut targets: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..b)).collect();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (dp, _) = vt_partition_oracle(&targets, 2, b).unwrap();
    let grid: Vec<f64> = (0..400).map(|g| b * g as f64 / 399.0).collect();
    let seg_score = |seg: &[f64]| -> f64 {
        grid.iter()
            .chain(seg.iter())
            .map(|&v| seg.iter().map(|&t| 100.0 * vt_kernel(v, t, b)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best = f64::NEG_INFINITY;
    for split in 1..6 {
        best = best.max(seg_score(&targets[..split]) + seg_score(&targets[split..]));
    }
    worst = worst.max((dp - best / 6.0).abs());
    CheckResult::from_measure("vt_oracle", worst, 1e-9)
}

/// Monotone-trace check for a user-supplied instance file.
pub fn instance_monotonicity_check(path: &Path) -> Result<CheckResult> {
    let (rmdp, k) = load_instance(path)?;
    let mut rng = stream_rng(112, 0);
    let init = initial_hard_assignment(rmdp.n_agents, k, &mut rng);
    let out = em_solve(&rmdp, &init, 50, &mut rng)?;
    let worst_drop = out
        .sw_trace
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max);
    Ok(CheckResult::from_measure("instance_monotone", worst_drop, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_verify(None).unwrap();
        for r in &results {
            assert!(r.pass, "{}", r.line());
        }
    }

    /// Mutation test: a deliberately corrupted gradient must fail the check.
    #[test]
    fn corrupted_gradient_fails() {
        let r = actor_gradient_check(0.05);
        assert!(!r.pass, "corruption went undetected: {}", r.line());
    }

    #[test]
    fn instance_check_from_file() {
        let mut rng = stream_rng(9, 0);
        let (rmdp, k) = random_instance(&mut rng, 4, 2, 4, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        rmdp_core::tabular::save_instance(&path, &rmdp, k).unwrap();
        let r = instance_monotonicity_check(&path).unwrap();
        assert!(r.pass);
    }
}
