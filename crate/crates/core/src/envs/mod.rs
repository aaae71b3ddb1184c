//! Built-in environments and their exact reference oracles.

pub mod resource_gathering;
pub mod velocity;

pub use resource_gathering::{
    rg_optimal_oracle, Move, ResourceGathering, ResourceGatheringConfig,
};
pub use velocity::{vt_kernel, vt_partition_oracle, VelocityTrack, VelocityTrackConfig};

use crate::rmdp::Env;

/// Everything needed to build fresh copies of one environment instance.
#[derive(Debug, Clone)]
pub enum EnvConfig {
    ResourceGathering(ResourceGatheringConfig),
    VelocityTrack(VelocityTrackConfig),
}

impl EnvConfig {
    pub fn n_agents(&self) -> usize {
        match self {
            EnvConfig::ResourceGathering(c) => c.n(),
            EnvConfig::VelocityTrack(c) => c.targets.len(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvConfig::ResourceGathering(c) => c.time_limit,
            EnvConfig::VelocityTrack(c) => c.horizon,
        }
    }

    pub fn make(&self) -> Box<dyn Env> {
        match self {
            EnvConfig::ResourceGathering(c) => Box::new(ResourceGathering::new(c.clone())),
            EnvConfig::VelocityTrack(c) => Box::new(VelocityTrack::new(c.clone())),
        }
    }
}
