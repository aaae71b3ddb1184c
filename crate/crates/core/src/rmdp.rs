//! Problem definition and the shared rollout / evaluation machinery.
//!
//! An instance couples one environment with `n` agents (each owning a reward
//! entry of the per-step reward vector) and a budget of `k < n` policies.
//! Everything downstream — PPO training, assignment learning, baselines —
//! works through the types in this module.

use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Built-in environment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvId {
    ResourceGathering,
    VelocityTrack,
    Tabular,
}

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::ResourceGathering => "resource_gathering",
            EnvId::VelocityTrack => "velocity_track",
            EnvId::Tabular => "tabular",
        }
    }
}

impl std::str::FromStr for EnvId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resource_gathering" => Ok(EnvId::ResourceGathering),
            "velocity_track" => Ok(EnvId::VelocityTrack),
            "tabular" => Ok(EnvId::Tabular),
            other => Err(Error::invalid(format!("unknown env id `{other}`"))),
        }
    }
}

/// The problem instance: which environment, how many agents, how many
/// policies, and the discounting/episode-length bookkeeping.
#[derive(Debug, Clone)]
pub struct RMdpSpec {
    pub env_id: EnvId,
    /// Number of agents (distinct reward functions).
    pub n: usize,
    /// Policy budget. `k < n` is the interesting regime; `k = 1` and `k = n`
    /// are allowed as degenerate runs.
    pub k: usize,
    pub gamma: f64,
    pub horizon: usize,
}

impl RMdpSpec {
    pub fn new(env_id: EnvId, n: usize, k: usize, gamma: f64, horizon: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("n and k must be positive"));
        }
        if k > n {
            return Err(Error::invalid(format!("k = {k} must not exceed n = {n}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma = {gamma} must lie in (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(Self { env_id, n, k, gamma, horizon })
    }
}

/// Row-stochastic n-by-k assignment of agents to representatives.
///
/// `alpha[(i, j)]` is the probability that agent `i` is served by
/// representative `j`. Hard assignments have one-hot rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    alpha: Array2<f64>,
}

const ROW_SUM_TOL: f64 = 1e-6;

impl AssignmentMatrix {
    /// Validates row stochasticity to within 1e-6.
    pub fn new(alpha: Array2<f64>) -> Result<Self> {
        for (i, row) in alpha.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &x in row.iter() {
                if !(0.0..=1.0 + ROW_SUM_TOL).contains(&x) {
                    return Err(Error::invalid(format!(
                        "assignment entry out of [0, 1] in row {i}: {x}"
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!(
                    "assignment row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { alpha })
    }

    /// Hard assignment from per-agent representative labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut alpha = Array2::zeros((labels.len(), k));
        for (i, &j) in labels.iter().enumerate() {
            if j >= k {
                return Err(Error::invalid(format!("label {j} out of range for k = {k}")));
            }
            alpha[(i, j)] = 1.0;
        }
        Ok(Self { alpha })
    }

    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn k(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.alpha.view()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.alpha[(i, j)]
    }

    /// Total probability mass assigned to representative `j`.
    pub fn column_mass(&self, j: usize) -> f64 {
        self.alpha.column(j).sum()
    }

    /// Row-wise argmax with lexicographic tie-breaking.
    pub fn labels(&self) -> Vec<usize> {
        self.alpha
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_v = row[0];
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best = j;
                        best_v = v;
                    }
                }
                best
            })
            .collect()
    }

    /// Row-wise argmax as a hard matrix; idempotent on hard inputs.
    pub fn harden(&self) -> AssignmentMatrix {
        AssignmentMatrix::from_labels(&self.labels(), self.k()).expect("labels in range")
    }

    pub fn is_hard(&self) -> bool {
        self.alpha.iter().all(|&x| x == 0.0 || x == 1.0)
    }

    /// Number of agents assigned (by argmax) to each representative.
    pub fn rep_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k()];
        for l in self.labels() {
            counts[l] += 1;
        }
        counts
    }
}

/// One action in either of the two action spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    /// Unclipped sample; environments clamp to their own bounds.
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpec {
    Discrete { n: usize },
    Continuous { dim: usize },
}

/// What an environment returns from one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Vec<f32>,
    /// One reward per agent, always length `n`.
    pub rewards: Vec<f64>,
    pub done: bool,
}

/// A single-actor environment shared by all agents: identical dynamics, one
/// reward entry per agent per step.
pub trait Env {
    fn n_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_spec(&self) -> ActionSpec;
    fn horizon(&self) -> usize;
    fn reset(&mut self) -> Vec<f32>;
    fn step(&mut self, action: &Action) -> Result<StepOutcome>;
}

/// Sampling-only view of a policy, used for evaluation and scripted oracles.
pub trait Policy {
    fn act(&self, obs: &[f32], rng: &mut ChaCha8Rng) -> Action;
}

/// Decision record produced while collecting training experience.
#[derive(Debug, Clone)]
pub struct ActDecision {
    /// Observation as the networks see it (normalized, clipped).
    pub net_obs: Vec<f32>,
    pub action: Action,
    pub log_prob: f64,
    /// Per-agent value estimates at the current state (length n).
    pub values: Vec<f64>,
}

/// Policy view used by `rollout`: may update internal statistics (e.g. the
/// observation normalizer) as experience streams through it.
pub trait RolloutPolicy {
    fn decide(&mut self, obs: &[f32], rng: &mut ChaCha8Rng) -> ActDecision;
    /// Value estimates at `obs` without mutating any statistics.
    fn values_frozen(&self, obs: &[f32]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: Action,
    /// One entry per agent.
    pub rewards: Vec<f64>,
    pub next_state: Vec<f32>,
    pub done: bool,
    pub log_prob: f64,
    /// Per-agent value estimates at `state`.
    pub value_estimates: Vec<f64>,
}

/// A fixed-size batch of experience collected by one representative.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub representative_id: usize,
    pub transitions: Vec<Transition>,
    /// Exclusive end index of every completed episode, strictly increasing.
    pub episode_boundaries: Vec<usize>,
    /// Undiscounted per-agent returns of each completed episode.
    pub episode_returns: Vec<Vec<f64>>,
    /// Per-agent value estimates at the state following the last transition;
    /// zeros when the batch ends exactly on an episode boundary.
    pub bootstrap_values: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Mean-per-agent utilitarian social welfare of an assignment given a table
/// of per-(agent, representative) values.
pub fn social_welfare(alpha: &AssignmentMatrix, value_table: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, k) = (alpha.n(), alpha.k());
    if value_table.nrows() != n || value_table.ncols() != k {
        return Err(Error::invalid(format!(
            "value table is {}x{}, expected {n}x{k}",
            value_table.nrows(),
            value_table.ncols()
        )));
    }
    if value_table.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("value table has non-finite entries"));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..k {
            total += alpha.get(i, j) * value_table[(i, j)];
        }
    }
    Ok(total / n as f64)
}

/// Collects exactly `max_steps` transitions, restarting episodes on
/// termination. The final episode may be left incomplete; its bootstrap
/// values are recorded for advantage estimation.
pub fn rollout(
    env: &mut dyn Env,
    policy: &mut dyn RolloutPolicy,
    rng: &mut ChaCha8Rng,
    max_steps: usize,
    representative_id: usize,
) -> Result<TrajectoryBatch> {
    let n = env.n_agents();
    let horizon = env.horizon();
    let mut transitions = Vec::with_capacity(max_steps);
    let mut episode_boundaries = Vec::new();
    let mut episode_returns = Vec::new();

    let mut raw_obs = env.reset();
    let mut episode_len = 0usize;
    let mut running_returns = vec![0.0f64; n];

    while transitions.len() < max_steps {
        if raw_obs.iter().any(|x| !x.is_finite()) {
            return Err(Error::EnvironmentFault {
                step: transitions.len(),
                msg: "non-finite observation".into(),
            });
        }
        let decision = policy.decide(&raw_obs, rng);
        let outcome = env.step(&decision.action)?;
        if outcome.rewards.len() != n {
            return Err(Error::EnvironmentFault {
                step: transitions.len(),
                msg: format!("reward vector has {} entries, expected {n}", outcome.rewards.len()),
            });
        }
        if outcome.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::EnvironmentFault {
                step: transitions.len(),
                msg: "non-finite reward".into(),
            });
        }

        for (acc, &r) in running_returns.iter_mut().zip(&outcome.rewards) {
            *acc += r;
        }
        episode_len += 1;
        debug_assert!(episode_len <= horizon, "episode exceeded horizon");

        transitions.push(Transition {
            state: decision.net_obs,
            action: decision.action,
            rewards: outcome.rewards,
            next_state: outcome.obs.clone(),
            done: outcome.done,
            log_prob: decision.log_prob,
            value_estimates: decision.values,
        });

        if outcome.done {
            episode_boundaries.push(transitions.len());
            episode_returns.push(std::mem::replace(&mut running_returns, vec![0.0; n]));
            episode_len = 0;
            raw_obs = env.reset();
        } else {
            raw_obs = outcome.obs;
        }
    }

    let bootstrap_values = match transitions.last() {
        Some(t) if !t.done => policy.values_frozen(&t.next_state),
        _ => vec![0.0; n],
    };

    Ok(TrajectoryBatch {
        representative_id,
        transitions,
        episode_boundaries,
        episode_returns,
        bootstrap_values,
    })
}

/// Monte-Carlo estimate of the per-(agent, representative) value table:
/// `value_table[(i, j)]` is the mean undiscounted episode return of agent `i`
/// under policy `j` over `episodes` episodes. The reported welfare scores the
/// hardened assignment.
pub fn evaluate(
    env_factory: &dyn Fn() -> Box<dyn Env>,
    policies: &[&dyn Policy],
    alpha: &AssignmentMatrix,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Array2<f64>, f64)> {
    if episodes == 0 {
        return Err(Error::invalid("episodes must be at least 1"));
    }
    let k = policies.len();
    let mut env = env_factory();
    let n = env.n_agents();
    let mut table = Array2::zeros((n, k));

    for (j, policy) in policies.iter().enumerate() {
        for _ in 0..episodes {
            let mut obs = env.reset();
            let mut steps = 0usize;
            loop {
                let action = policy.act(&obs, rng);
                let outcome = env.step(&action)?;
                for i in 0..n {
                    table[(i, j)] += outcome.rewards[i];
                }
                steps += 1;
                if outcome.done {
                    break;
                }
                if steps > env.horizon() {
                    return Err(Error::ContractViolation(
                        "environment did not terminate within its horizon".into(),
                    ));
                }
                obs = outcome.obs;
            }
        }
    }
    table.mapv_inplace(|v| v / episodes as f64);
    let sw = social_welfare(&alpha.harden(), table.view())?;
    Ok((table, sw))
}
