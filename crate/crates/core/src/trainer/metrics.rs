use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "iteration,mean_reward,baseline_mean,entropy_mean,surrogate_loss,greedy_eval_score";

/// Training diagnostics at one evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Mean terminal reward of the sampled trajectories.
    pub mean_reward: f64,
    /// Mean of the per-start baselines.
    pub baseline_mean: f64,
    /// Mean per-step policy entropy over the sampled trajectories.
    pub entropy_mean: f64,
    pub surrogate_loss: f64,
    /// Mean greedy-rollout reward on the held-out starts.
    pub greedy_eval_score: f64,
}

impl MetricsRow {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.mean_reward,
            self.baseline_mean,
            self.entropy_mean,
            self.surrogate_loss,
            self.greedy_eval_score
        )
    }
}

pub fn write_metrics_csv(mut w: impl Write, rows: &[MetricsRow]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    Ok(())
}

pub fn metrics_csv_string(rows: &[MetricsRow]) -> String {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Input("metrics header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Input(format!("bad metrics line `{l}`")))
            };
            Ok(MetricsRow {
                iteration: f
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Input(format!("bad metrics line `{l}`")))?,
                mean_reward: num(1)?,
                baseline_mean: num(2)?,
                entropy_mean: num(3)?,
                surrogate_loss: num(4)?,
                greedy_eval_score: num(5)?,
            })
        })
        .collect()
}
