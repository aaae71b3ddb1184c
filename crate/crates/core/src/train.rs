//! Training loops for the four algorithms: the alternating hard-assignment
//! learner, the end-to-end soft-assignment learner, and the two baselines
//! (random assignment, trajectory clustering).
//!
//! All randomness flows through per-purpose ChaCha streams derived from the
//! run seed, so runs are bit-reproducible and the four algorithms share
//! identical policy-training randomness — at k = 1 they produce identical
//! parameter trajectories.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assign::{initial_hard_assignment, AssignmentLogits, QTable};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{ObsNormalizer, TensorRecord};
use crate::ppo::{ppo_update, ActorBundle, CriticBundle, PpoConfig};
use crate::rmdp::{
    evaluate, rollout, ActDecision, Action, AssignmentMatrix, Env, Policy, RMdpSpec,
    RolloutPolicy, TrajectoryBatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Em,
    EndToEnd,
    Clustering,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Em,
        Algorithm::EndToEnd,
        Algorithm::Clustering,
        Algorithm::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::EndToEnd => "end_to_end",
            Algorithm::Clustering => "clustering",
            Algorithm::Random => "random",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Algorithm::Em),
            "end_to_end" => Ok(Algorithm::EndToEnd),
            "clustering" => Ok(Algorithm::Clustering),
            "random" => Ok(Algorithm::Random),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub spec: RMdpSpec,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    /// Environment transitions collected per representative over the run.
    pub transitions_per_policy: u64,
    /// Evaluation cadence in update rounds.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Running observation normalization (useful for continuous
    /// observations; one-hot gridworld observations are already unit scale).
    pub obs_norm: bool,
    pub seed: u64,
}

impl TrainConfig {
    fn rounds(&self) -> usize {
        self.transitions_per_policy.div_ceil(self.ppo.batch_size as u64) as usize
    }
}

// Seed streams; every consumer owns one so algorithms stay comparable.
const STREAM_INIT: u64 = 1;
const STREAM_ASSIGN: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_EVAL: u64 = 4;
pub(crate) const STREAM_FEATURES: u64 = 5;
/// Stream for environment-instance randomness (velocity targets).
pub const STREAM_ENV: u64 = 6;
const STREAM_ROLLOUT_BASE: u64 = 100;

/// ChaCha stream `stream` of the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Actor, critic and the shared observation normalizer of one run.
#[derive(Debug, Clone)]
pub struct PolicySet {
    pub actor: ActorBundle,
    pub critic: CriticBundle,
    pub normalizer: ObsNormalizer,
    pub obs_norm: bool,
}

impl PolicySet {
    pub fn new(cfg: &TrainConfig) -> Self {
        let env = cfg.env.make();
        let mut init_rng = stream_rng(cfg.seed, STREAM_INIT);
        let actor = ActorBundle::new(
            env.obs_dim(),
            &[64],
            cfg.spec.k,
            env.action_spec(),
            &mut init_rng,
        );
        let critic = CriticBundle::new(env.obs_dim(), &[64], cfg.spec.k, cfg.spec.n, &mut init_rng);
        let normalizer = ObsNormalizer::new(env.obs_dim());
        Self { actor, critic, normalizer, obs_norm: cfg.obs_norm }
    }

    fn net_obs(&self, obs: &[f32]) -> Vec<f32> {
        if self.obs_norm {
            self.normalizer.normalize(obs)
        } else {
            obs.to_vec()
        }
    }

    pub fn k(&self) -> usize {
        self.actor.net.n_heads()
    }

    /// Sampling-only view of head `j` with frozen normalizer statistics.
    pub fn eval_policy(&self, head: usize) -> EvalPolicy<'_> {
        EvalPolicy { set: self, head }
    }

    fn rollout_policy(&mut self, head: usize) -> RepRolloutPolicy<'_> {
        let Self { actor, critic, normalizer, obs_norm } = self;
        RepRolloutPolicy { actor, critic, normalizer, obs_norm: *obs_norm, head }
    }

    /// Replicates head `source` of a donor set into every head of a fresh
    /// `k`-head set (trunk and normalizer copied, optimizer state reset).
    pub fn warm_start_from(donor: &PolicySet, cfg: &TrainConfig, source: usize) -> Self {
        let mut set = PolicySet::new(cfg);
        set.actor.net.trunk = donor.actor.net.trunk.clone();
        set.critic.net.trunk = donor.critic.net.trunk.clone();
        for head in set.actor.net.heads.iter_mut() {
            *head = donor.actor.net.heads[source].clone();
        }
        for head in set.critic.net.heads.iter_mut() {
            *head = donor.critic.net.heads[source].clone();
        }
        for ls in set.actor.log_std.iter_mut() {
            *ls = donor.actor.log_std[source].clone();
        }
        set.normalizer = donor.normalizer.clone();
        set
    }

    /// Flattens every parameter (plus normalizer state) into checkpoint
    /// records, names prefixed by `prefix`.
    pub fn tensors(&self, prefix: &str) -> Vec<TensorRecord> {
        let mut out = Vec::new();
        let mut push_net = |net: &crate::nn::DenseNet, part: &str| {
            for (i, layer) in net.trunk.iter().enumerate() {
                out.push(TensorRecord::new(
                    format!("{prefix}{part}_trunk_{i}_w"),
                    vec![layer.w.nrows(), layer.w.ncols()],
                    layer.w.iter().cloned().collect(),
                ));
                out.push(TensorRecord::new(
                    format!("{prefix}{part}_trunk_{i}_b"),
                    vec![layer.b.len()],
                    layer.b.to_vec(),
                ));
            }
            for (j, layer) in net.heads.iter().enumerate() {
                out.push(TensorRecord::new(
                    format!("{prefix}{part}_head_{j}_w"),
                    vec![layer.w.nrows(), layer.w.ncols()],
                    layer.w.iter().cloned().collect(),
                ));
                out.push(TensorRecord::new(
                    format!("{prefix}{part}_head_{j}_b"),
                    vec![layer.b.len()],
                    layer.b.to_vec(),
                ));
            }
        };
        push_net(&self.actor.net, "actor");
        push_net(&self.critic.net, "critic");
        for (j, ls) in self.actor.log_std.iter().enumerate() {
            out.push(TensorRecord::new(
                format!("{prefix}actor_log_std_{j}"),
                vec![ls.len()],
                ls.to_vec(),
            ));
        }
        let (mean, m2, count) = self.normalizer.state();
        out.push(TensorRecord::new(
            format!("{prefix}obs_mean"),
            vec![mean.len()],
            mean.iter().map(|&x| x as f32).collect(),
        ));
        out.push(TensorRecord::new(
            format!("{prefix}obs_m2"),
            vec![m2.len()],
            m2.iter().map(|&x| x as f32).collect(),
        ));
        out.push(TensorRecord::new(format!("{prefix}obs_count"), vec![1], vec![count as f32]));
        out
    }
}

/// Frozen sampling view used by `evaluate` and scripted comparisons.
pub struct EvalPolicy<'a> {
    set: &'a PolicySet,
    head: usize,
}

impl Policy for EvalPolicy<'_> {
    fn act(&self, obs: &[f32], rng: &mut ChaCha8Rng) -> Action {
        let net_obs = self.set.net_obs(obs);
        let (action, _) = self
            .set
            .actor
            .sample(&net_obs, self.head, rng)
            .expect("head index valid");
        action
    }
}

struct RepRolloutPolicy<'a> {
    actor: &'a ActorBundle,
    critic: &'a CriticBundle,
    normalizer: &'a mut ObsNormalizer,
    obs_norm: bool,
    head: usize,
}

impl RepRolloutPolicy<'_> {
    fn net_obs(&self, obs: &[f32]) -> Vec<f32> {
        if self.obs_norm {
            self.normalizer.normalize(obs)
        } else {
            obs.to_vec()
        }
    }
}

impl RolloutPolicy for RepRolloutPolicy<'_> {
    fn decide(&mut self, obs: &[f32], rng: &mut ChaCha8Rng) -> ActDecision {
        if self.obs_norm {
            self.normalizer.update(obs);
        }
        let net_obs = self.net_obs(obs);
        let (action, log_prob) = self
            .actor
            .sample(&net_obs, self.head, rng)
            .expect("head index valid");
        let values = self
            .critic
            .values1(&net_obs, self.head)
            .expect("head index valid");
        ActDecision { net_obs, action, log_prob, values }
    }

    fn values_frozen(&self, obs: &[f32]) -> Vec<f64> {
        let net_obs = self.net_obs(obs);
        self.critic.values1(&net_obs, self.head).expect("head index valid")
    }
}

#[derive(Debug, Clone)]
pub struct ProgressPoint {
    pub round: usize,
    pub transitions_per_policy: u64,
    pub social_welfare: f64,
    pub rep_counts: Vec<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub history: Vec<ProgressPoint>,
    /// The learner's final assignment (soft for the end-to-end learner).
    pub final_alpha: AssignmentMatrix,
    /// Monte-Carlo per-(agent, representative) value table from the final
    /// evaluation.
    pub value_table: Array2<f64>,
    /// Welfare of the hardened final assignment.
    pub social_welfare: f64,
    pub policies: PolicySet,
}

enum Assigner {
    Fixed,
    Em(QTable),
    Soft(AssignmentLogits),
}

/// Dispatches one full training run.
pub fn run(algo: Algorithm, cfg: &TrainConfig) -> Result<RunOutcome> {
    let n = cfg.spec.n;
    let k = cfg.spec.k;
    match algo {
        Algorithm::Em => {
            let alpha = initial_hard_assignment(n, k, &mut stream_rng(cfg.seed, STREAM_ASSIGN));
            train_run(cfg, alpha, Assigner::Em(QTable::new(n, k)), None)
        }
        Algorithm::EndToEnd => {
            let logits = AssignmentLogits::new(n, k);
            let alpha = logits.soft_alpha();
            train_run(cfg, alpha, Assigner::Soft(logits), None)
        }
        Algorithm::Random => {
            let alpha = crate::baselines::random_assignment(
                n,
                k,
                &mut stream_rng(cfg.seed, STREAM_ASSIGN),
            )?;
            train_run(cfg, alpha, Assigner::Fixed, None)
        }
        Algorithm::Clustering => crate::baselines::clustering_pipeline(cfg),
    }
}

/// Trains `cfg.spec.k` policies under a fixed assignment (the baselines'
/// training phase, also reused for universal pretraining).
pub fn train_with_fixed_assignment(
    cfg: &TrainConfig,
    alpha: AssignmentMatrix,
    warm_start: Option<PolicySet>,
) -> Result<RunOutcome> {
    train_run(cfg, alpha, Assigner::Fixed, warm_start)
}

fn train_run(
    cfg: &TrainConfig,
    mut alpha: AssignmentMatrix,
    mut assigner: Assigner,
    warm_start: Option<PolicySet>,
) -> Result<RunOutcome> {
    cfg.ppo.validate()?;
    if alpha.n() != cfg.spec.n || alpha.k() != cfg.spec.k {
        return Err(Error::invalid("assignment shape does not match the spec"));
    }
    let k = cfg.spec.k;
    let batch = cfg.ppo.batch_size;
    let rounds = cfg.rounds();
    let budget = (rounds * batch).max(1) as f64;

    let mut set = warm_start.unwrap_or_else(|| PolicySet::new(cfg));
    let mut envs: Vec<Box<dyn Env>> = (0..k).map(|_| cfg.env.make()).collect();
    let mut rollout_rngs: Vec<ChaCha8Rng> = (0..k)
        .map(|j| stream_rng(cfg.seed, STREAM_ROLLOUT_BASE + j as u64))
        .collect();
    let mut shuffle_rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut eval_rng = stream_rng(cfg.seed, STREAM_EVAL);

    let mut history = Vec::new();
    for round in 0..rounds {
        let lr = cfg.ppo.lr_at((round * batch) as f64 / budget);

        let mut batches: Vec<TrajectoryBatch> = Vec::with_capacity(k);
        for (j, env) in envs.iter_mut().enumerate() {
            let mut policy = set.rollout_policy(j);
            batches.push(rollout(
                env.as_mut(),
                &mut policy,
                &mut rollout_rngs[j],
                batch,
                j,
            )?);
        }

        let logits = match &mut assigner {
            Assigner::Soft(l) => Some(l),
            _ => None,
        };
        ppo_update(
            &batches,
            &alpha,
            &mut set.actor,
            &mut set.critic,
            &cfg.ppo,
            lr,
            logits,
            &mut shuffle_rng,
        )?;

        match &mut assigner {
            Assigner::Fixed => {}
            Assigner::Em(q) => {
                for batch in &batches {
                    for returns in &batch.episode_returns {
                        for (i, &r) in returns.iter().enumerate() {
                            q.update(i, batch.representative_id, r);
                        }
                    }
                }
                alpha = q.e_step();
            }
            Assigner::Soft(l) => {
                alpha = l.soft_alpha();
            }
        }

        if (round + 1) % cfg.eval_every == 0 && round + 1 != rounds {
            let (_, sw) = evaluate_set(cfg, &set, &alpha, &mut eval_rng)?;
            history.push(ProgressPoint {
                round: round + 1,
                transitions_per_policy: ((round + 1) * batch) as u64,
                social_welfare: sw,
                rep_counts: alpha.rep_counts(),
            });
        }
    }

    let (value_table, social_welfare) = evaluate_set(cfg, &set, &alpha, &mut eval_rng)?;
    history.push(ProgressPoint {
        round: rounds,
        transitions_per_policy: (rounds * batch) as u64,
        social_welfare,
        rep_counts: alpha.rep_counts(),
    });
    Ok(RunOutcome {
        history,
        final_alpha: alpha,
        value_table,
        social_welfare,
        policies: set,
    })
}

fn evaluate_set(
    cfg: &TrainConfig,
    set: &PolicySet,
    alpha: &AssignmentMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<(Array2<f64>, f64)> {
    let factory = || cfg.env.make();
    let policies: Vec<EvalPolicy<'_>> = (0..set.k()).map(|j| set.eval_policy(j)).collect();
    let refs: Vec<&dyn Policy> = policies.iter().map(|p| p as &dyn Policy).collect();
    evaluate(&factory, &refs, alpha, cfg.eval_episodes, rng)
}

/// Monte-Carlo evaluation of a finished run (fresh evaluation stream).
pub fn evaluate_outcome(
    cfg: &TrainConfig,
    outcome: &RunOutcome,
    episodes: usize,
) -> Result<(Array2<f64>, f64)> {
    let factory = || cfg.env.make();
    let policies: Vec<EvalPolicy<'_>> =
        (0..outcome.policies.k()).map(|j| outcome.policies.eval_policy(j)).collect();
    let refs: Vec<&dyn Policy> = policies.iter().map(|p| p as &dyn Policy).collect();
    let mut rng = stream_rng(cfg.seed, STREAM_EVAL + 1000);
    evaluate(&factory, &refs, &outcome.final_alpha, episodes, &mut rng)
}
