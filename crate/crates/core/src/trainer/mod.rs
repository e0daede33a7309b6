//! Deterministic CPU trainer for a small conv classifier: data sources, the
//! network with its hand-written backward pass, optimizers, and the on-disk
//! weight snapshot format.

mod data;
mod evaluator;
mod gradcheck;
mod idx;
mod net;
mod optim;
mod scalar;
mod snapshot;
mod train;

pub use data::{synthetic_shapes, Dataset, DatasetSpec, SHAPES_CLASSES, SHAPES_SIZE};
pub use evaluator::{TrainerEvaluator, DEFAULT_LR, DEFAULT_WEIGHT_DECAY};
pub use gradcheck::{gradient_check, GradCheck, ParamSubset, FD_STEP};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use net::{BatchStats, Block, ConvSpec, MiniConvNet, NetSpec};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use scalar::Scalar;
pub use snapshot::{
    decode_snapshot, encode_snapshot, read_snapshot, snapshot_file_name, to_tensors, write_snapshot, write_snapshot_dir,
    SnapshotLayer,
    SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};
pub use train::{batch_order, evaluate_accuracy, train_epochs, train_from, TrainConfig, TrainingRun, DIVERGENCE_LOSS};
