//! Flat key=value run configuration with command-line overrides.
//!
//! Schema (all keys optional, defaults in parentheses):
//!
//! ```text
//! algorithm   em | end_to_end | clustering | random   (em)
//! env         resource_gathering | velocity_track     (resource_gathering)
//! n           agents (25 gridworld / 100 velocity)
//! k           policy budget (3)
//! seed        run seed (0)
//! transitions_per_policy   training budget per policy
//!             (desk scale: 200000 gridworld / 500000 velocity;
//!              --full: 1000000 / 2000000)
//! gamma (0.99)  lr_start (0.0003)  lr_end (0.0001)  entropy_coef (0.001)
//! gae_lambda (0.95)  clip_eps (0.2)  batch_size (2048)  minibatch_size (64)
//! epochs (10)  grad_clip_norm (0.5)
//! eval_every (10)  eval_episodes (10)
//! vt_b (2.5)  vt_horizon (200)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rmdp_core::envs::{EnvConfig, ResourceGatheringConfig, VelocityTrackConfig};
use rmdp_core::ppo::PpoConfig;
use rmdp_core::train::{stream_rng, Algorithm, TrainConfig, STREAM_ENV};
use rmdp_core::{EnvId, Error, RMdpSpec, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub env: EnvId,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// None resolves to the env default (desk scale, or paper scale with
    /// `full = true`).
    pub transitions_per_policy: Option<u64>,
    pub full: bool,
    pub ppo: PpoConfig,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Running observation normalization. `None` resolves per env:
    /// off for the one-hot gridworld, on for the velocity task.
    pub obs_norm: Option<bool>,
    /// Discount factor. `None` resolves per env: 0.999 for the gridworld's
    /// long terminal-reward horizon, 0.99 for the velocity task.
    pub gamma: Option<f64>,
    pub vt_b: f64,
    pub vt_horizon: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Em,
            env: EnvId::ResourceGathering,
            n: 25,
            k: 3,
            seed: 0,
            transitions_per_policy: None,
            full: false,
            ppo: PpoConfig::default(),
            eval_every: 10,
            eval_episodes: 10,
            obs_norm: None,
            gamma: None,
            vt_b: 2.5,
            vt_horizon: 200,
        }
    }
}

impl RunConfig {
    /// Parses a config file plus `key=value` overrides (overrides win).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected key=value, got `{line}`"),
                })?;
                pairs.push((key.trim().to_string(), value.trim().to_string()));
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override `{item}` is not key=value")))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }

        let mut cfg = RunConfig::default();
        let mut n_explicit = false;
        for (key, value) in &pairs {
            cfg.apply(key, value, &mut n_explicit)?;
        }
        if !n_explicit {
            cfg.n = match cfg.env {
                EnvId::ResourceGathering => 25,
                EnvId::VelocityTrack => 100,
                EnvId::Tabular => cfg.n,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, n_explicit: &mut bool) -> Result<()> {
        let bad = |what: &str| Error::invalid(format!("bad value `{value}` for key `{what}`"));
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "env" => self.env = value.parse()?,
            "n" => {
                self.n = value.parse().map_err(|_| bad("n"))?;
                *n_explicit = true;
            }
            "k" => self.k = value.parse().map_err(|_| bad("k"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "transitions_per_policy" => {
                self.transitions_per_policy =
                    Some(value.parse().map_err(|_| bad("transitions_per_policy"))?)
            }
            "gamma" => self.gamma = Some(value.parse().map_err(|_| bad("gamma"))?),
            "lr_start" => self.ppo.lr_start = value.parse().map_err(|_| bad("lr_start"))?,
            "lr_end" => self.ppo.lr_end = value.parse().map_err(|_| bad("lr_end"))?,
            "entropy_coef" => {
                self.ppo.entropy_coef = value.parse().map_err(|_| bad("entropy_coef"))?
            }
            "gae_lambda" => self.ppo.gae_lambda = value.parse().map_err(|_| bad("gae_lambda"))?,
            "clip_eps" => self.ppo.clip_eps = value.parse().map_err(|_| bad("clip_eps"))?,
            "batch_size" => self.ppo.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "minibatch_size" => {
                self.ppo.minibatch_size = value.parse().map_err(|_| bad("minibatch_size"))?
            }
            "epochs" => self.ppo.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "grad_clip_norm" => {
                self.ppo.grad_clip_norm = value.parse().map_err(|_| bad("grad_clip_norm"))?
            }
            "eval_every" => self.eval_every = value.parse().map_err(|_| bad("eval_every"))?,
            "eval_episodes" => {
                self.eval_episodes = value.parse().map_err(|_| bad("eval_episodes"))?
            }
            "obs_norm" => {
                self.obs_norm = Some(value.parse().map_err(|_| bad("obs_norm"))?)
            }
            "vt_b" => self.vt_b = value.parse().map_err(|_| bad("vt_b"))?,
            "vt_horizon" => self.vt_horizon = value.parse().map_err(|_| bad("vt_horizon"))?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown config key `{other}` (see the schema in the README)"
                )))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.env == EnvId::ResourceGathering && self.n != 25 {
            return Err(Error::invalid("resource_gathering has one agent per tile: n = 25"));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::invalid(format!("need 1 <= k <= n, got k={} n={}", self.k, self.n)));
        }
        self.ppo.validate()
    }

    /// Budget after resolving the desk/full default.
    pub fn budget(&self) -> u64 {
        self.transitions_per_policy.unwrap_or(match (self.env, self.full) {
            (EnvId::ResourceGathering, false) => 200_000,
            (EnvId::ResourceGathering, true) => 1_000_000,
            (EnvId::VelocityTrack, false) => 500_000,
            (EnvId::VelocityTrack, true) => 2_000_000,
            (EnvId::Tabular, _) => 0,
        })
    }

    pub fn env_config(&self) -> EnvConfig {
        match self.env {
            EnvId::ResourceGathering | EnvId::Tabular => {
                EnvConfig::ResourceGathering(ResourceGatheringConfig::default())
            }
            EnvId::VelocityTrack => EnvConfig::VelocityTrack(VelocityTrackConfig::sample(
                self.n,
                self.vt_b,
                self.vt_horizon,
                &mut stream_rng(self.seed, STREAM_ENV),
            )),
        }
    }

    /// Discount factor after resolving the per-env default.
    pub fn gamma_resolved(&self) -> f64 {
        self.gamma.unwrap_or(match self.env {
            EnvId::ResourceGathering | EnvId::Tabular => 0.999,
            EnvId::VelocityTrack => 0.99,
        })
    }

    /// Observation normalization after resolving the per-env default:
    /// off for the one-hot gridworld, on for the continuous velocity task.
    pub fn obs_norm_resolved(&self) -> bool {
        self.obs_norm.unwrap_or(match self.env {
            EnvId::ResourceGathering | EnvId::Tabular => false,
            EnvId::VelocityTrack => true,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let env = self.env_config();
        let horizon = env.horizon();
        let mut ppo = self.ppo.clone();
        ppo.gamma = self.gamma_resolved();
        Ok(TrainConfig {
            spec: RMdpSpec::new(self.env, self.n, self.k, ppo.gamma, horizon)?,
            env,
            ppo,
            transitions_per_policy: self.budget(),
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
            obs_norm: self.obs_norm_resolved(),
            seed: self.seed,
        })
    }

    /// Canonical snapshot: fixed key order, resolved budget.
    pub fn snapshot(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("algorithm", self.algorithm.as_str().to_string());
        map.insert("env", self.env.as_str().to_string());
        map.insert("n", self.n.to_string());
        map.insert("k", self.k.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("transitions_per_policy", self.budget().to_string());
        map.insert("gamma", format!("{}", self.gamma_resolved()));
        map.insert("lr_start", format!("{}", self.ppo.lr_start));
        map.insert("lr_end", format!("{}", self.ppo.lr_end));
        map.insert("entropy_coef", format!("{}", self.ppo.entropy_coef));
        map.insert("gae_lambda", format!("{}", self.ppo.gae_lambda));
        map.insert("clip_eps", format!("{}", self.ppo.clip_eps));
        map.insert("batch_size", self.ppo.batch_size.to_string());
        map.insert("minibatch_size", self.ppo.minibatch_size.to_string());
        map.insert("epochs", self.ppo.epochs.to_string());
        map.insert("grad_clip_norm", format!("{}", self.ppo.grad_clip_norm));
        map.insert("eval_every", self.eval_every.to_string());
        map.insert("eval_episodes", self.eval_episodes.to_string());
        map.insert("obs_norm", self.obs_norm_resolved().to_string());
        if self.env == EnvId::VelocityTrack {
            map.insert("vt_b", format!("{}", self.vt_b));
            map.insert("vt_horizon", self.vt_horizon.to_string());
        }
        let mut out = String::new();
        for (key, value) in map {
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// FNV-1a over the canonical snapshot, as 8 hex digits.
    pub fn hash(&self) -> String {
        format!("{:08x}", fnv1a(self.snapshot().as_bytes()))
    }
}

pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c9dc5;
    for &b in bytes {
        hash ^= b as u32;
        hash = hash.wrapping_mul(0x01000193);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::load(None, &["k=5".into(), "seed=7".into()]).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n, 25);
        assert_eq!(cfg.budget(), 200_000);
    }

    #[test]
    fn env_switch_changes_defaults() {
        let cfg = RunConfig::load(None, &["env=velocity_track".into()]).unwrap();
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.budget(), 500_000);
        let mut full = cfg.clone();
        full.full = true;
        assert_eq!(full.budget(), 2_000_000);
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let err = RunConfig::load(None, &["entropy_ceof=1".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("entropy_ceof"), "{msg}");
    }

    #[test]
    fn file_and_override_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nalgorithm=random\nk=2\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &["k=4".into()]).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Random);
        assert_eq!(cfg.k, 4);
    }

    #[test]
    fn snapshot_hash_is_stable_and_sensitive() {
        let a = RunConfig::load(None, &[]).unwrap();
        let b = RunConfig::load(None, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::load(None, &["k=4".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn velocity_targets_depend_only_on_seed() {
        let a = RunConfig::load(None, &["env=velocity_track".into(), "seed=3".into()]).unwrap();
        let b = RunConfig::load(None, &["env=velocity_track".into(), "seed=3".into()]).unwrap();
        match (a.env_config(), b.env_config()) {
            (EnvConfig::VelocityTrack(x), EnvConfig::VelocityTrack(y)) => {
                assert_eq!(x.targets, y.targets);
            }
            _ => panic!("expected velocity configs"),
        }
    }
}
