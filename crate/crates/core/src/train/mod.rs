//! Optimizer, schedule and the supervised, distillation and self-distillation
//! training loops.

pub mod checkpoint;
pub mod cone;
pub mod loops;
pub mod model;
pub mod optim;

pub use checkpoint::TrainCheckpoint;
pub use loops::{
    read_metrics_csv, train_kd, train_plain, train_self_kd, write_metrics_csv, MetricsRow,
    SelfKdOutcome, Teacher, TrainOutcome, METRICS_HEADER,
};
pub use model::{evaluate, z_readouts, QnnModel};
pub use optim::{adam_step, init_params, lr_at, AdamState, LrUnit, Schedule, TrainConfig};
