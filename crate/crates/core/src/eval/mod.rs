pub mod bench;
pub mod generate;

pub use bench::{aggregate, evaluate, greedy_rollout, greedy_rollout_with, BenchError, BenchReport, BenchRow, EvalConfig, RolloutResult};
