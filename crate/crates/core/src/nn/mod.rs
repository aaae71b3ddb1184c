//! Minimal neural-network stack: shared-trunk multi-head dense nets with
//! manual forward/backward passes, Adam, orthogonal initialization, policy
//! distributions and observation normalization.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod dist;
pub mod init;
pub mod norm;

pub use adam::{global_grad_norm, scale_grads, Adam64, AdamState};
pub use checkpoint::{load_tensors, save_tensors, TensorRecord};
pub use dense::{DenseNet, Linear, NetGrads, TrunkCache};
pub use dense::dense_test_hooks;
pub use init::orthogonal_init;
pub use norm::ObsNormalizer;
