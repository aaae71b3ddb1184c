//! PPO for k representatives sharing trunk parameters, with per-agent critic
//! heads and assignment-weighted marginal advantages.
//!
//! Each representative's critic head predicts one value per agent; actor
//! heads are trained on the assignment-weighted sum of per-agent advantages,
//! normalized per policy over the batch. One `ppo_update` call consumes one
//! fresh batch per representative: epochs of shuffled minibatches, with the
//! shared-trunk gradients of all representatives accumulated before every
//! optimizer step. Soft assignment logits, when supplied, are updated in the
//! same backward passes through the same surrogate loss.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::assign::{soft_logits_grad, AssignmentLogits};
use crate::error::{Error, Result};
use crate::nn::{dist, global_grad_norm, AdamState, DenseNet, NetGrads};
use crate::rmdp::{Action, ActionSpec, AssignmentMatrix, TrajectoryBatch};

#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub gamma: f64,
    /// Linear learning-rate anneal endpoints over a run.
    pub lr_start: f64,
    pub lr_end: f64,
    pub entropy_coef: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    /// Transitions collected per representative per update.
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub grad_clip_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr_start: 3e-4,
            lr_end: 1e-4,
            entropy_coef: 0.001,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            batch_size: 2048,
            minibatch_size: 64,
            epochs: 10,
            grad_clip_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.minibatch_size == 0 {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        if self.batch_size % self.minibatch_size != 0 {
            return Err(Error::invalid(format!(
                "batch {} not divisible by minibatch {}",
                self.batch_size, self.minibatch_size
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Annealed learning rate at `progress` in [0, 1].
    pub fn lr_at(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.lr_start + (self.lr_end - self.lr_start) * p
    }
}

/// Standard GAE(lambda) over one reward/value stream. `dones` truncates the
/// recursion at episode ends; `bootstrap` is the value of the state after
/// the final transition (zero when it ended an episode).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t_max = rewards.len();
    assert_eq!(values.len(), t_max);
    assert_eq!(dones.len(), t_max);
    let mut advantages = vec![0.0; t_max];
    let mut gae = 0.0;
    for t in (0..t_max).rev() {
        let next_value = if t + 1 < t_max { values[t + 1] } else { bootstrap };
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        gae = delta + gamma * lambda * nonterminal * gae;
        advantages[t] = gae;
    }
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, targets)
}

/// Assignment-weighted sum of per-agent advantages for one representative.
pub fn marginal_advantage(adv: ArrayView2<'_, f64>, alpha_column: &[f64]) -> Vec<f64> {
    assert_eq!(adv.ncols(), alpha_column.len());
    adv.rows()
        .into_iter()
        .map(|row| row.iter().zip(alpha_column).map(|(a, w)| a * w).sum())
        .collect()
}

/// In-place batch normalization to mean 0 / std 1; the scale step is skipped
/// when the pre-normalization std is at most 1e-8.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let mean = adv.iter().sum::<f64>() / adv.len() as f64;
    for a in adv.iter_mut() {
        *a -= mean;
    }
    let std = (adv.iter().map(|a| a * a).sum::<f64>() / adv.len() as f64).sqrt();
    if std > 1e-8 {
        for a in adv.iter_mut() {
            *a /= std;
        }
    }
}

#[inline]
fn checked_ratio(new_lp: f64, old_lp: f64, head: usize) -> Result<f64> {
    let ratio = (new_lp - old_lp).exp();
    if !ratio.is_finite() {
        return Err(Error::TrainingFault {
            representative: Some(head),
            msg: "non-finite importance ratio".into(),
        });
    }
    Ok(ratio)
}

/// One element of the negated clipped surrogate. Returns the loss term and
/// its derivative with respect to the new log probability.
pub fn surrogate_term(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let clipped_ratio = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    let unclipped = ratio * advantage;
    let clipped = clipped_ratio * advantage;
    if unclipped <= clipped {
        // d(ratio)/d(log pi) = ratio.
        (-unclipped, -advantage * ratio)
    } else {
        (-clipped, 0.0)
    }
}

/// Mean squared error over (agents, transitions) and its upstream gradient.
pub fn critic_loss(
    predictions: ArrayView2<'_, f32>,
    targets: ArrayView2<'_, f32>,
) -> (f64, Array2<f32>) {
    assert_eq!(predictions.dim(), targets.dim());
    let count = (predictions.nrows() * predictions.ncols()) as f64;
    let mut upstream = Array2::zeros(predictions.raw_dim());
    let mut loss = 0.0;
    for ((u, &p), &y) in upstream.iter_mut().zip(predictions.iter()).zip(targets.iter()) {
        let diff = p as f64 - y as f64;
        loss += diff * diff;
        *u = (2.0 * diff / count) as f32;
    }
    (loss / count, upstream)
}

/// Actor network plus the state-independent log standard deviations of its
/// Gaussian heads (empty for categorical actors).
#[derive(Debug, Clone)]
pub struct ActorBundle {
    pub net: DenseNet,
    pub log_std: Vec<Array1<f32>>,
    pub action_spec: ActionSpec,
    adam: AdamState,
    adam_log_std: Option<AdamState>,
}

impl ActorBundle {
    pub fn new(
        input: usize,
        hidden: &[usize],
        k: usize,
        action_spec: ActionSpec,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let out_dim = match action_spec {
            ActionSpec::Discrete { n } => n,
            ActionSpec::Continuous { dim } => dim,
        };
        let net = DenseNet::new(input, hidden, &vec![out_dim; k], 0.01, rng);
        let (log_std, adam_log_std) = match action_spec {
            ActionSpec::Discrete { .. } => (Vec::new(), None),
            ActionSpec::Continuous { dim } => (
                vec![Array1::zeros(dim); k],
                Some(AdamState::new(&vec![dim; k])),
            ),
        };
        let adam = AdamState::for_blocks(&net.param_blocks());
        Self { net, log_std, action_spec, adam, adam_log_std }
    }

    /// Samples an action from head `j`, returning the unclipped action and
    /// its log probability.
    pub fn sample(
        &self,
        net_obs: &[f32],
        head: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Action, f64)> {
        let out = self.net.forward1(net_obs, head)?;
        match self.action_spec {
            ActionSpec::Discrete { .. } => {
                let probs = dist::softmax(&out);
                let a = dist::categorical_sample(&probs, rng);
                Ok((Action::Discrete(a), dist::categorical_log_prob(&out, a)))
            }
            ActionSpec::Continuous { .. } => {
                let ls = self.log_std[head].as_slice().unwrap();
                let a = dist::gaussian_sample(&out, ls, rng);
                let lp = dist::gaussian_log_prob(&out, ls, &a);
                Ok((Action::Continuous(a), lp))
            }
        }
    }

    fn clamp_log_std(&mut self) {
        for ls in &mut self.log_std {
            ls.mapv_inplace(|x| x.clamp(dist::LOG_STD_MIN, dist::LOG_STD_MAX));
        }
    }
}

/// Critic network: one head per representative, `n` outputs per head.
#[derive(Debug, Clone)]
pub struct CriticBundle {
    pub net: DenseNet,
    adam: AdamState,
}

impl CriticBundle {
    pub fn new(input: usize, hidden: &[usize], k: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let net = DenseNet::new(input, hidden, &vec![n; k], 1.0, rng);
        let adam = AdamState::for_blocks(&net.param_blocks());
        Self { net, adam }
    }

    /// Per-agent value estimates at one observation under head `j`.
    pub fn values1(&self, net_obs: &[f32], head: usize) -> Result<Vec<f64>> {
        Ok(self
            .net
            .forward1(net_obs, head)?
            .into_iter()
            .map(|v| v as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PpoMetrics {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    /// Representatives whose actor update was skipped for zero assigned mass.
    pub skipped: Vec<usize>,
}

/// Precomputed per-representative training arrays.
pub struct RepData {
    pub obs: Array2<f32>,
    pub actions: Vec<Action>,
    pub old_log_probs: Vec<f64>,
    /// Per-agent GAE advantages, shape (T, n).
    pub advantages: Array2<f64>,
    /// Critic regression targets, shape (T, n).
    pub targets: Array2<f32>,
    /// Normalized marginal advantages, length T.
    pub marginal: Vec<f64>,
}

/// Runs per-agent GAE on one batch and assembles the training arrays for
/// representative `j` under the given assignment column.
pub fn prepare_rep_data(
    batch: &TrajectoryBatch,
    alpha_column: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<RepData> {
    let t_max = batch.len();
    let n = alpha_column.len();
    if t_max == 0 {
        return Err(Error::invalid("empty trajectory batch"));
    }
    let obs_dim = batch.transitions[0].state.len();
    let mut obs = Array2::zeros((t_max, obs_dim));
    let mut actions = Vec::with_capacity(t_max);
    let mut old_log_probs = Vec::with_capacity(t_max);
    let dones: Vec<bool> = batch.transitions.iter().map(|t| t.done).collect();

    for (t, tr) in batch.transitions.iter().enumerate() {
        if tr.rewards.len() != n || tr.value_estimates.len() != n {
            return Err(Error::invalid("transition width does not match agent count"));
        }
        obs.row_mut(t)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&tr.state);
        actions.push(tr.action.clone());
        old_log_probs.push(tr.log_prob);
    }

    let mut advantages = Array2::zeros((t_max, n));
    let mut targets = Array2::zeros((t_max, n));
    let mut rewards_i = vec![0.0f64; t_max];
    let mut values_i = vec![0.0f64; t_max];
    for i in 0..n {
        for (t, tr) in batch.transitions.iter().enumerate() {
            rewards_i[t] = tr.rewards[i];
            values_i[t] = tr.value_estimates[i];
        }
        let (adv, tgt) = compute_gae(
            &rewards_i,
            &values_i,
            &dones,
            batch.bootstrap_values[i],
            gamma,
            lambda,
        );
        for t in 0..t_max {
            advantages[(t, i)] = adv[t];
            targets[(t, i)] = tgt[t] as f32;
        }
    }
    if advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::TrainingFault {
            representative: Some(batch.representative_id),
            msg: "non-finite advantages".into(),
        });
    }

    let mut marginal = marginal_advantage(advantages.view(), alpha_column);
    normalize_advantages(&mut marginal);
    Ok(RepData { obs, actions, old_log_probs, advantages, targets, marginal })
}

struct Scratch {
    x: Array2<f32>,
    actor_grads: NetGrads,
    critic_grads: NetGrads,
    log_std_grads: Vec<Array1<f32>>,
}

/// Statistics of one actor minibatch pass.
pub struct ActorPassStats {
    pub loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    /// Clipped importance ratios per minibatch row, for the logits loss.
    pub clipped_ratios: Vec<f64>,
}

/// Forward/backward pass of one actor minibatch for head `j`, accumulating
/// into `grads` (and `log_std_grads` for Gaussian heads).
#[allow(clippy::too_many_arguments)]
pub fn actor_minibatch(
    actor: &ActorBundle,
    head: usize,
    x: ArrayView2<'_, f32>,
    actions: &[&Action],
    old_log_probs: &[f64],
    marginal_adv: &[f64],
    entropy_coef: f64,
    clip_eps: f64,
    grads: &mut NetGrads,
    log_std_grads: &mut [Array1<f32>],
) -> Result<ActorPassStats> {
    let b = x.nrows();
    let cache = actor.net.trunk_forward(x);
    let out = actor.net.head_forward(&cache, head)?;
    let out_dim = out.ncols();
    let mut upstream = Array2::<f32>::zeros(out.raw_dim());
    let mut loss = 0.0;
    let mut entropy_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped_ratios = Vec::with_capacity(b);
    let inv_b = 1.0 / b as f64;
    let mut probs = vec![0.0f64; out_dim];
    const LN_2PI: f64 = 1.8378770664093453;

    for t in 0..b {
        let row = out.row(t);
        let row = row.as_slice().unwrap();
        let urow = upstream.row_mut(t).into_slice().unwrap();

        // Per-row log-prob, entropy, and their fused gradients.
        let (new_lp, ent) = match (&actor.action_spec, actions[t]) {
            (ActionSpec::Discrete { .. }, Action::Discrete(a)) => {
                let mut max = f32::NEG_INFINITY;
                for &l in row {
                    max = max.max(l);
                }
                let max = max as f64;
                let mut z = 0.0;
                for (p, &l) in probs.iter_mut().zip(row) {
                    *p = (l as f64 - max).exp();
                    z += *p;
                }
                let ln_z = z.ln();
                let inv_z = 1.0 / z;
                let mut p_dot_logit = 0.0;
                for (p, &l) in probs.iter_mut().zip(row) {
                    *p *= inv_z;
                    p_dot_logit += *p * l as f64;
                }
                let new_lp = row[*a] as f64 - max - ln_z;
                // H = -sum p ln p with ln p = logit - max - ln z.
                let ent = max + ln_z - p_dot_logit;
                let ratio = checked_ratio(new_lp, old_log_probs[t], head)?;
                clipped_ratios.push(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps));
                let (term, d_lp) = surrogate_term(ratio, marginal_adv[t], clip_eps);
                loss += inv_b * (term - entropy_coef * ent);
                for o in 0..out_dim {
                    let ln_p = row[o] as f64 - max - ln_z;
                    let d_ent = -probs[o] * (ln_p + ent);
                    let one_hot = (o == *a) as u8 as f64;
                    urow[o] =
                        (inv_b * (d_lp * (one_hot - probs[o]) - entropy_coef * d_ent)) as f32;
                }
                (new_lp, ent)
            }
            (ActionSpec::Continuous { .. }, Action::Continuous(a)) => {
                let ls = actor.log_std[head].as_slice().unwrap();
                let mut new_lp = 0.0;
                let mut ent = 0.0;
                for d in 0..out_dim {
                    let lsd = ls[d] as f64;
                    let sigma = lsd.exp();
                    let z = (a[d] - row[d] as f64) / sigma;
                    new_lp += -0.5 * z * z - lsd - 0.5 * LN_2PI;
                    ent += 0.5 * (LN_2PI + 1.0) + lsd;
                }
                let ratio = checked_ratio(new_lp, old_log_probs[t], head)?;
                clipped_ratios.push(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps));
                let (term, d_lp) = surrogate_term(ratio, marginal_adv[t], clip_eps);
                loss += inv_b * (term - entropy_coef * ent);
                let g = &mut log_std_grads[head];
                for d in 0..out_dim {
                    let lsd = ls[d] as f64;
                    let sigma = lsd.exp();
                    let z = (a[d] - row[d] as f64) / sigma;
                    // Entropy is independent of the mean; dH/dlog_std = 1.
                    urow[d] = (inv_b * d_lp * (z / sigma)) as f32;
                    g[d] += (inv_b * (d_lp * (z * z - 1.0) - entropy_coef)) as f32;
                }
                (new_lp, ent)
            }
            _ => return Err(Error::invalid("action kind does not match actor")),
        };
        entropy_sum += ent;
        kl_sum += old_log_probs[t] - new_lp;
    }

    actor.net.backward(&cache, &[(head, upstream.view())], grads)?;
    if !loss.is_finite() {
        return Err(Error::TrainingFault {
            representative: Some(head),
            msg: "non-finite actor loss".into(),
        });
    }
    Ok(ActorPassStats {
        loss,
        entropy: entropy_sum * inv_b,
        approx_kl: kl_sum * inv_b,
        clipped_ratios,
    })
}

/// Forward/backward pass of one critic minibatch for head `j`.
pub fn critic_minibatch(
    critic: &CriticBundle,
    head: usize,
    x: ArrayView2<'_, f32>,
    targets: ArrayView2<'_, f32>,
    grads: &mut NetGrads,
) -> Result<f64> {
    let cache = critic.net.trunk_forward(x);
    let pred = critic.net.head_forward(&cache, head)?;
    let (loss, upstream) = critic_loss(pred.view(), targets);
    critic.net.backward(&cache, &[(head, upstream.view())], grads)?;
    if !loss.is_finite() {
        return Err(Error::TrainingFault {
            representative: Some(head),
            msg: "non-finite critic loss".into(),
        });
    }
    Ok(loss)
}

/// One PPO update from one fresh batch per representative.
///
/// Every critic head trains on all agents regardless of the assignment;
/// actor heads with zero assigned mass are skipped. When `logits` is
/// supplied, its gradient is accumulated from every representative's
/// minibatch and stepped once per minibatch index, alongside the actors.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    batches: &[TrajectoryBatch],
    alpha: &AssignmentMatrix,
    actor: &mut ActorBundle,
    critic: &mut CriticBundle,
    cfg: &PpoConfig,
    lr: f64,
    mut logits: Option<&mut AssignmentLogits>,
    rng: &mut ChaCha8Rng,
) -> Result<PpoMetrics> {
    cfg.validate()?;
    let k = alpha.k();
    let n = alpha.n();
    if batches.len() != k {
        return Err(Error::invalid(format!(
            "{} batches for {k} representatives",
            batches.len()
        )));
    }
    let t_max = batches[0].len();
    if t_max % cfg.minibatch_size != 0 {
        return Err(Error::invalid(format!(
            "batch length {t_max} not divisible by minibatch {}",
            cfg.minibatch_size
        )));
    }

    let mut skipped = Vec::new();
    let mut rep_data = Vec::with_capacity(k);
    for (j, batch) in batches.iter().enumerate() {
        if batch.len() != t_max {
            return Err(Error::invalid("all batches must have equal length"));
        }
        let column: Vec<f64> = (0..n).map(|i| alpha.get(i, j)).collect();
        rep_data.push(prepare_rep_data(batch, &column, cfg.gamma, cfg.gae_lambda)?);
        if alpha.column_mass(j) == 0.0 {
            skipped.push(j);
        }
    }

    let obs_dim = rep_data[0].obs.ncols();
    let mb = cfg.minibatch_size;
    let num_mb = t_max / mb;
    let mut scratch = Scratch {
        x: Array2::zeros((mb, obs_dim)),
        actor_grads: actor.net.grads(),
        critic_grads: critic.net.grads(),
        log_std_grads: actor.log_std.iter().map(|l| Array1::zeros(l.len())).collect(),
    };
    let mut orders: Vec<Vec<usize>> = (0..k).map(|_| (0..t_max).collect()).collect();
    let mut metrics = PpoMetrics { skipped: skipped.clone(), ..Default::default() };
    let mut stat_count = 0.0f64;
    let mut psi_scores = Array2::<f64>::zeros((n, k));

    for _epoch in 0..cfg.epochs {
        for order in orders.iter_mut() {
            order.shuffle(rng);
        }
        for m in 0..num_mb {
            scratch.actor_grads.zero();
            scratch.critic_grads.zero();
            for g in &mut scratch.log_std_grads {
                g.fill(0.0);
            }
            if logits.is_some() {
                psi_scores.fill(0.0);
            }

            for j in 0..k {
                let data = &rep_data[j];
                let idx = &orders[j][m * mb..(m + 1) * mb];
                for (row, &t) in idx.iter().enumerate() {
                    scratch
                        .x
                        .row_mut(row)
                        .as_slice_mut()
                        .unwrap()
                        .copy_from_slice(data.obs.row(t).as_slice().unwrap());
                }
                // Critic: every agent head output trains on its target.
                let mut tgt = Array2::zeros((mb, n));
                for (row, &t) in idx.iter().enumerate() {
                    tgt.row_mut(row)
                        .as_slice_mut()
                        .unwrap()
                        .copy_from_slice(data.targets.row(t).as_slice().unwrap());
                }
                let closs = critic_minibatch(
                    critic,
                    j,
                    scratch.x.view(),
                    tgt.view(),
                    &mut scratch.critic_grads,
                )?;
                metrics.critic_loss += closs;

                if skipped.contains(&j) {
                    continue;
                }
                let actions: Vec<&Action> = idx.iter().map(|&t| &data.actions[t]).collect();
                let old_lp: Vec<f64> = idx.iter().map(|&t| data.old_log_probs[t]).collect();
                let madv: Vec<f64> = idx.iter().map(|&t| data.marginal[t]).collect();
                let stats = actor_minibatch(
                    actor,
                    j,
                    scratch.x.view(),
                    &actions,
                    &old_lp,
                    &madv,
                    cfg.entropy_coef,
                    cfg.clip_eps,
                    &mut scratch.actor_grads,
                    &mut scratch.log_std_grads,
                )?;
                metrics.actor_loss += stats.loss;
                metrics.entropy += stats.entropy;
                metrics.approx_kl += stats.approx_kl;
                stat_count += 1.0;

                if logits.is_some() {
                    let inv_b = 1.0 / mb as f64;
                    for (row, &t) in idx.iter().enumerate() {
                        let c = stats.clipped_ratios[row] * inv_b;
                        for i in 0..n {
                            psi_scores[(i, j)] += c * data.advantages[(t, i)];
                        }
                    }
                }
            }

            // Optimizer steps: critic, then actor (net plus log-std jointly
            // clipped), then the assignment logits.
            {
                let mut blocks = scratch.critic_grads.blocks_mut();
                crate::nn::scale_grads(&mut blocks, cfg.grad_clip_norm);
                let grads = scratch.critic_grads.blocks();
                critic.adam.step(&mut critic.net.param_blocks_mut(), &grads, lr)?;
            }
            {
                let mut blocks = scratch.actor_grads.blocks_mut();
                let mut ls_blocks: Vec<&mut [f32]> = scratch
                    .log_std_grads
                    .iter_mut()
                    .map(|g| g.as_slice_mut().unwrap())
                    .collect();
                // Joint global-norm clipping across net and log-std grads.
                let joint_norm = {
                    let all: Vec<&[f32]> = blocks
                        .iter()
                        .map(|b| &**b)
                        .chain(ls_blocks.iter().map(|b| &**b))
                        .collect();
                    global_grad_norm(&all)
                };
                if joint_norm > cfg.grad_clip_norm && joint_norm > 0.0 {
                    let scale = (cfg.grad_clip_norm / joint_norm) as f32;
                    for b in blocks.iter_mut().chain(ls_blocks.iter_mut()) {
                        for g in b.iter_mut() {
                            *g *= scale;
                        }
                    }
                }
                let grads = scratch.actor_grads.blocks();
                actor.adam.step(&mut actor.net.param_blocks_mut(), &grads, lr)?;
                if let Some(adam_ls) = actor.adam_log_std.as_mut() {
                    let g: Vec<&[f32]> = scratch
                        .log_std_grads
                        .iter()
                        .map(|g| g.as_slice().unwrap())
                        .collect();
                    let mut params: Vec<&mut [f32]> = actor
                        .log_std
                        .iter_mut()
                        .map(|l| l.as_slice_mut().unwrap())
                        .collect();
                    adam_ls.step(&mut params, &g, lr)?;
                }
                actor.clamp_log_std();
            }
            if let Some(l) = logits.as_deref_mut() {
                let grad = soft_logits_grad(&l.soft_alpha(), psi_scores.view())?;
                l.apply_grad(grad.view())?;
            }
        }
    }

    let mb_steps = (cfg.epochs * num_mb * k) as f64;
    metrics.critic_loss /= mb_steps;
    if stat_count > 0.0 {
        metrics.actor_loss /= stat_count;
        metrics.entropy /= stat_count;
        metrics.approx_kl /= stat_count;
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn gae_with_zero_lambda_is_the_td_residual() {
        let rewards = [1.0, 2.0, 3.0];
        let values = [0.5, 0.4, 0.3];
        let dones = [false, false, true];
        let gamma = 0.9;
        let (adv, _) = compute_gae(&rewards, &values, &dones, 7.0, gamma, 0.0);
        assert_abs_diff_eq!(adv[0], 1.0 + gamma * 0.4 - 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(adv[1], 2.0 + gamma * 0.3 - 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(adv[2], 3.0 - 0.3, epsilon = 1e-12); // terminal: no bootstrap
    }

    #[test]
    fn gae_single_terminal_step() {
        let (adv, targets) = compute_gae(&[1.0], &[0.0], &[true], 9.0, 0.99, 0.95);
        assert_abs_diff_eq!(adv[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(targets[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gae_matches_hand_unrolled_recursion() {
        let gamma = 0.9;
        let lambda = 0.95;
        let rewards = [1.0, -0.5, 2.0];
        let values = [0.3, 0.2, 0.1];
        let dones = [false, false, true];
        let d2 = 2.0 - 0.1;
        let d1 = -0.5 + gamma * 0.1 - 0.2;
        let d0 = 1.0 + gamma * 0.2 - 0.3;
        let a2 = d2;
        let a1 = d1 + gamma * lambda * a2;
        let a0 = d0 + gamma * lambda * a1;
        let (adv, _) = compute_gae(&rewards, &values, &dones, 0.0, gamma, lambda);
        assert_abs_diff_eq!(adv[0], a0, epsilon = 1e-9);
        assert_abs_diff_eq!(adv[1], a1, epsilon = 1e-9);
        assert_abs_diff_eq!(adv[2], a2, epsilon = 1e-9);
    }

    /// Independent oracle: direct double loop over (gamma lambda)^l sums.
    #[test]
    fn gae_matches_brute_force_on_random_episodes() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let t_max = rng.gen_range(1..40);
            let rewards: Vec<f64> = (0..t_max).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let values: Vec<f64> = (0..t_max).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut dones = vec![false; t_max];
            for d in dones.iter_mut() {
                *d = rng.gen_bool(0.15);
            }
            let bootstrap = rng.gen_range(-1.0..1.0);
            let gamma = 0.98;
            let lambda = 0.9;
            let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
            for t in 0..t_max {
                let mut expect = 0.0;
                let mut weight = 1.0;
                for l in t..t_max {
                    let next_v = if l + 1 < t_max { values[l + 1] } else { bootstrap };
                    let nt = if dones[l] { 0.0 } else { 1.0 };
                    let delta = rewards[l] + gamma * next_v * nt - values[l];
                    expect += weight * delta;
                    if dones[l] {
                        break;
                    }
                    weight *= gamma * lambda;
                }
                assert_abs_diff_eq!(adv[t], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn critic_loss_examples() {
        let (loss, _) = critic_loss(array![[2.0f32]].view(), array![[2.0f32]].view());
        assert_eq!(loss, 0.0);
        let (loss, up) = critic_loss(array![[0.0f32]].view(), array![[2.0f32]].view());
        assert_abs_diff_eq!(loss, 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(up[(0, 0)] as f64, -4.0, epsilon = 1e-6);
        // Mixed hand case: mean of (1-0)^2, (2-4)^2, (0-1)^2, (3-3)^2.
        let (loss, _) = critic_loss(
            array![[1.0f32, 2.0], [0.0, 3.0]].view(),
            array![[0.0f32, 4.0], [1.0, 3.0]].view(),
        );
        assert_abs_diff_eq!(loss, (1.0 + 4.0 + 1.0 + 0.0) / 4.0, epsilon = 1e-9);
    }

    #[test]
    fn marginal_advantage_examples() {
        let adv = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        // One-hot on agent index 2 picks out its column.
        let m = marginal_advantage(adv.view(), &[0.0, 0.0, 1.0]);
        assert_eq!(m, vec![3.0, 6.0]);
        // Uniform over two agents averages to 3 on the row [2, 4].
        let adv = array![[2.0, 4.0]];
        let m = marginal_advantage(adv.view(), &[0.5, 0.5]);
        assert_eq!(m, vec![3.0]);
        // Mixed weights, batch of 4.
        let adv = array![[1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [-1.0, 3.0]];
        let w = [0.25, 0.75];
        let m = marginal_advantage(adv.view(), &w);
        for (t, row) in adv.rows().into_iter().enumerate() {
            let expect = row[0] * w[0] + row[1] * w[1];
            assert_abs_diff_eq!(m[t], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalization_properties() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut adv: Vec<f64> = (0..256).map(|_| rng.gen_range(-3.0..9.0)).collect();
        normalize_advantages(&mut adv);
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        let std = (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / adv.len() as f64)
            .sqrt();
        assert!(mean.abs() <= 1e-6);
        assert!((std - 1.0).abs() <= 1e-6);
        // Tiny pre-normalization std: centered but not rescaled.
        let mut flat = vec![5.0; 16];
        normalize_advantages(&mut flat);
        assert!(flat.iter().all(|&a| a.abs() < 1e-12));
    }

    #[test]
    fn surrogate_examples() {
        // rho = 1: unclipped, loss element is -advantage.
        assert_eq!(surrogate_term(1.0, 2.5, 0.2).0, -2.5);
        // rho = 1.5, adv = 1, eps = 0.2: clip is active.
        assert_abs_diff_eq!(surrogate_term(1.5, 1.0, 0.2).0, -1.2, epsilon = 1e-12);
        // rho = 0.5, adv = -1, eps = 0.2: -min(-0.5, -0.8) = 0.8.
        assert_abs_diff_eq!(surrogate_term(0.5, -1.0, 0.2).0, 0.8, epsilon = 1e-12);
    }
}
