//! Training substrate: flat-parameter MLPs, SGD, data handling and metrics.

pub mod data;
pub mod metrics;
pub mod model;

pub use data::{downsample, load_idx, load_idx_files, partition, Dataset, Partition, PartitionMode, SyntheticSpec};
pub use metrics::{auroc, balanced_accuracy, evaluate, EvalReport};
pub use model::{sgd, Activation, LayerParams, Loss, Model, ModelSpec};
