//! Attribute relevance: traversal sweeps, Spearman's ρ with significance
//! tests, and the thresholded, label-deduplicated selection rule.

mod select;
mod spearman;
mod sweep;

pub use select::{
    analyze, read_published, replay, select, write_report_csv, Aggregation, CorrelationReport,
    Thresholds,
};
pub use spearman::{
    rank_average, spearman_p_value, spearman_rho, PValueMethod, EXACT_PERMUTATION_MAX_N,
    PERMUTATION_RESAMPLES,
};
pub use sweep::{
    sweep_all, sweep_attribute, sweep_grid, sweep_image, TraversalSweep, SWEEP_LO, SWEEP_POINTS,
    SWEEP_STEP,
};
