//! 1-D velocity tracking: each agent wants the actor to hold a personal
//! target velocity.
//!
//! Dynamics are a clamped integrator: the action accelerates the current
//! velocity by up to a tenth of the velocity range per step. The per-step
//! reward of agent `i` is a triangular kernel around its target, scaled so
//! that perfect tracking accumulates exactly 100 over an episode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rmdp::{Action, ActionSpec, Env, StepOutcome};

#[derive(Debug, Clone)]
pub struct VelocityTrackConfig {
    /// Maximum target velocity; the kernel half-width is `b / 20`.
    pub b: f64,
    pub horizon: usize,
    /// One target per agent, each in `[0, b]`.
    pub targets: Vec<f64>,
}

impl VelocityTrackConfig {
    /// Samples `n` targets uniformly from `[0, b]`.
    pub fn sample(n: usize, b: f64, horizon: usize, rng: &mut ChaCha8Rng) -> Self {
        let targets = (0..n).map(|_| rng.gen_range(0.0..=b)).collect();
        Self { b, horizon, targets }
    }

    pub fn accel_scale(&self) -> f64 {
        0.1 * self.b
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VelState {
    pub v: f64,
    pub t: usize,
}

/// Triangular reward kernel: 1 at the target, 0 outside `|v - target| >= b/20`.
pub fn vt_kernel(v: f64, target: f64, b: f64) -> f64 {
    1.0 - (20.0 * (v - target).abs() / b).min(1.0)
}

#[derive(Debug, Clone)]
pub struct VelocityTrack {
    config: VelocityTrackConfig,
    state: VelState,
    done: bool,
}

impl VelocityTrack {
    pub fn new(config: VelocityTrackConfig) -> Self {
        Self { config, state: VelState { v: 0.0, t: 0 }, done: true }
    }

    pub fn config(&self) -> &VelocityTrackConfig {
        &self.config
    }

    pub fn state(&self) -> VelState {
        self.state
    }

    /// Integrates one (clamped) action and pays each agent by kernel
    /// proximity of the new velocity to its target.
    pub fn apply(&mut self, action: f64) -> Result<(Vec<f64>, bool)> {
        if self.done {
            return Err(Error::ContractViolation(
                "step called on a finished episode".into(),
            ));
        }
        let a = action.clamp(-1.0, 1.0);
        let b = self.config.b;
        let v_next = (self.state.v + self.config.accel_scale() * a).clamp(0.0, b);
        self.state.v = v_next;
        self.state.t += 1;

        let unit = 100.0 / self.config.horizon as f64;
        let rewards = self
            .config
            .targets
            .iter()
            .map(|&target| unit * vt_kernel(v_next, target, b))
            .collect();
        let done = self.state.t >= self.config.horizon;
        self.done = done;
        Ok((rewards, done))
    }

    fn observation(&self) -> Vec<f32> {
        vec![
            (self.state.v / self.config.b) as f32,
            self.state.t as f32 / self.config.horizon as f32,
        ]
    }
}

impl Env for VelocityTrack {
    fn n_agents(&self) -> usize {
        self.config.targets.len()
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Continuous { dim: 1 }
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self) -> Vec<f32> {
        self.state = VelState { v: 0.0, t: 0 };
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let a = match action {
            Action::Continuous(v) if v.len() == 1 => v[0],
            Action::Continuous(v) => {
                return Err(Error::invalid(format!(
                    "velocity task takes 1-dimensional actions, got {}",
                    v.len()
                )))
            }
            Action::Discrete(_) => {
                return Err(Error::invalid("velocity task takes continuous actions"))
            }
        };
        let (rewards, done) = self.apply(a)?;
        Ok(StepOutcome { obs: self.observation(), rewards, done })
    }
}

/// Reference welfare from a dynamic program over contiguous segmentations of
/// the sorted targets into `k` groups, each group scored by the best single
/// held velocity. Candidate velocities are a 400-point grid over `[0, b]`
/// plus the group's own targets, so exact-tracking optima are attainable.
///
/// Returns the best per-agent welfare and the segment bounds as half-open
/// index ranges into the sorted target order.
pub fn vt_partition_oracle(
    targets: &[f64],
    k: usize,
    b: f64,
) -> Result<(f64, Vec<(usize, usize)>)> {
    let n = targets.len();
    if k == 0 || n == 0 {
        return Err(Error::invalid("need at least one target and one segment"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    const GRID: usize = 400;
    let grid: Vec<f64> = (0..GRID).map(|g| b * g as f64 / (GRID - 1) as f64).collect();

    // score[l][r]: best total welfare of agents [l, r) under one velocity.
    let score = |l: usize, r: usize| -> f64 {
        let segment = &sorted[l..r];
        let mut best = f64::NEG_INFINITY;
        for &v in grid.iter().chain(segment.iter()) {
            let total: f64 = segment
                .iter()
                .map(|&t| 100.0 * vt_kernel(v, t, b))
                .sum();
            best = best.max(total);
        }
        best
    };

    let mut scores = vec![vec![0.0f64; n + 1]; n];
    for l in 0..n {
        for r in (l + 1)..=n {
            scores[l][r] = score(l, r);
        }
    }

    // dp[j][r]: best welfare covering the first r agents with j segments.
    let neg = f64::NEG_INFINITY;
    let mut dp = vec![vec![neg; n + 1]; k + 1];
    let mut split = vec![vec![0usize; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for j in 1..=k {
        for r in j..=n {
            for l in (j - 1)..r {
                if dp[j - 1][l] == neg {
                    continue;
                }
                let cand = dp[j - 1][l] + scores[l][r];
                if cand > dp[j][r] {
                    dp[j][r] = cand;
                    split[j][r] = l;
                }
            }
        }
    }

    let mut bounds = Vec::with_capacity(k);
    let mut r = n;
    for j in (1..=k).rev() {
        let l = split[j][r];
        bounds.push((l, r));
        r = l;
    }
    bounds.reverse();
    Ok((dp[k][n] / n as f64, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn cfg(targets: Vec<f64>) -> VelocityTrackConfig {
        VelocityTrackConfig { b: 2.5, horizon: 200, targets }
    }

    #[test]
    fn perfect_tracking_pays_one_unit() {
        // Start at v = 0; a zero action keeps v' = 0.
        let mut env = VelocityTrack::new(cfg(vec![0.0]));
        env.reset();
        let (r, _) = env.apply(0.0).unwrap();
        assert_abs_diff_eq!(r[0], 100.0 / 200.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_edge_and_midpoint() {
        let b = 2.5;
        let h = 200.0;
        // |v - target| = b/20 is the kernel edge: zero reward.
        let mut env = VelocityTrack::new(cfg(vec![b / 20.0]));
        env.reset();
        let (r, _) = env.apply(0.0).unwrap();
        assert_abs_diff_eq!(r[0], 0.0, epsilon = 1e-12);
        // |v - target| = b/40 is the kernel midpoint.
        let mut env = VelocityTrack::new(cfg(vec![b / 40.0]));
        env.reset();
        let (r, _) = env.apply(0.0).unwrap();
        assert_abs_diff_eq!(r[0], 0.5 * 100.0 / h, epsilon = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_around_the_target() {
        let b = 3.0;
        for delta in [0.01, 0.05, 0.1, 0.2] {
            assert_abs_diff_eq!(
                vt_kernel(1.0 + delta, 1.0, b),
                vt_kernel(1.0 - delta, 1.0, b),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn equal_targets_get_equal_rewards() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut env = VelocityTrack::new(cfg(vec![1.0, 0.3, 1.0, 2.2]));
        env.reset();
        for _ in 0..50 {
            let (r, done) = env.apply(rng.gen_range(-1.0..1.0)).unwrap();
            assert_eq!(r[0], r[2]);
            assert!(r.iter().all(|&x| (0.0..=100.0 / 200.0 + 1e-12).contains(&x)));
            if done {
                break;
            }
        }
    }

    #[test]
    fn velocity_stays_clamped() {
        let mut env = VelocityTrack::new(cfg(vec![1.0]));
        env.reset();
        for _ in 0..30 {
            env.apply(-1.0).unwrap();
            assert!(env.state().v >= 0.0);
        }
    }

    #[test]
    fn oracle_single_agent_is_perfect() {
        let (sw, bounds) = vt_partition_oracle(&[1.7], 1, 2.5).unwrap();
        assert_abs_diff_eq!(sw, 100.0, epsilon = 1e-9);
        assert_eq!(bounds, vec![(0, 1)]);
    }

    #[test]
    fn oracle_two_agents_two_policies() {
        let b = 2.5;
        let (sw, _) = vt_partition_oracle(&[0.2 * b, 0.8 * b], 2, b).unwrap();
        assert_abs_diff_eq!(sw, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn oracle_matches_brute_force_single_segment() {
        let b = 2.0;
        let targets = [0.0, b / 40.0, b / 20.0, b];
        let (sw, bounds) = vt_partition_oracle(&targets, 1, b).unwrap();
        // Brute force over the same candidate set: grid plus targets.
        let mut best = f64::NEG_INFINITY;
        let grid: Vec<f64> = (0..400).map(|g| b * g as f64 / 399.0).collect();
        for &v in grid.iter().chain(targets.iter()) {
            let total: f64 = targets.iter().map(|&t| 100.0 * vt_kernel(v, t, b)).sum();
            best = best.max(total);
        }
        assert_abs_diff_eq!(sw, best / 4.0, epsilon = 1e-9);
        assert_eq!(bounds, vec![(0, 4)]);
    }

    #[test]
    fn oracle_rejects_k_above_n() {
        assert!(vt_partition_oracle(&[0.1, 0.2], 3, 1.0).is_err());
    }

    #[test]
    fn sampled_targets_stay_in_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let cfg = VelocityTrackConfig::sample(100, 4.0, 200, &mut rng);
        assert_eq!(cfg.targets.len(), 100);
        assert!(cfg.targets.iter().all(|&t| (0.0..=4.0).contains(&t)));
    }
}
