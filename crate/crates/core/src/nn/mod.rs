//! Equivariant networks: `S2Conv → ReLU → SO3Conv → ReLU → Linear → Softmax`
//! and variations, with exact gradients and Adam training.
//!
//! Feature maps are carried in the spectrum between convolutions and moved to
//! the SO(3) grid for each ReLU. Bandwidth drops happen inside the
//! convolutions, whose filters are only defined below the output bandwidth.
//! Filter parameters are the independent real coordinates of real-signal
//! spectra, so every feature map stays real.

mod checkpoint;
mod config;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, ManifestEntry, TrainingMeta, CHECKPOINT_MAGIC};
pub use config::{Head, LayerSpec, ModelConfig, TrainConfig};
pub use model::{argmax, log_sum_exp, softmax, Backward, GradientCheck, Layer, LayerGrad, Model, GRADIENT_FLOOR};
pub use optim::Adam;
pub use train::{evaluate, train, train_from, EpochStats, Evaluation, MetricRecord, TrainOutcome};
