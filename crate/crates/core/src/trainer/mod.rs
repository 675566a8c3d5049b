//! Soft policy gradient with a self-critical mean-of-K baseline, the vanilla
//! policy-gradient ablation, Adam updates and metrics.

mod adam;
mod config;
mod loss;
mod metrics;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{Mode, Preset, TrainConfig};
pub use loss::{advantage_coef, entropy_of, soft_pg_loss, surrogate_loss, Baseline};
pub use metrics::{metrics_csv_string, read_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};
pub use train::{
    batch_gradient, episode_gradient, eval_episodes, greedy_score, train, training_episode,
    BatchResult, EpisodeGradient, Trainer,
};
