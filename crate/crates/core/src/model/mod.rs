//! The classifier head over fixed feature vectors.

mod artifact;
mod config;
mod head;
mod objective;
mod stats;
mod train;

pub use artifact::{decode_head, encode_head, load_head, save_head, HeadArtifact, MSHD_MAGIC, MSHD_VERSION};
pub use config::{ForwardMask, FreezeDirection, TrainConfig};
pub use head::{evaluate_accuracy, HiddenLayer, MlpHead};
pub use objective::cross_entropy_batch;
pub use stats::{mean_and_std, weight_stats, Histogram, WeightStats};
pub use train::{fit_final_layer, train_head, ParamSnapshot, SnapshotTag, Snapshots, TrainedHead};
