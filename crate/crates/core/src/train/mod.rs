//! DQN training with prioritized replay, a target network and hindsight
//! relabeling.

mod dqn;
mod metrics;
mod optim;
mod replay;
mod schedule;
mod select;
mod trainer;

use thiserror::Error;

pub use dqn::{boltzmann_probabilities, boltzmann_select, bootstrap_target, compute_target, huber, huber_grad};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter, METRICS_COLUMNS};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{PrioritizedReplay, Sample};
pub use schedule::LinearSchedule;
pub use select::{select_checkpoint, ValidationRecord};
pub use trainer::{EpisodeStats, ReplayEntry, TrainConfig, TrainOutcome, Trainer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training problems")]
    NoProblems,
    #[error("problem `{0}` uses a different domain than the first training problem")]
    DomainMismatch(String),
    #[error("optimization step on an empty replay buffer")]
    EmptyBuffer,
    #[error(transparent)]
    Network(#[from] crate::qnet::QNetError),
    #[error(transparent)]
    Lift(#[from] crate::lifting::LiftError),
    #[error(transparent)]
    Bench(#[from] crate::eval::BenchError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics csv: {0}")]
    Csv(#[from] csv::Error),
}
