//! Significance tests, correlations and the per-group report.

mod correlation;
mod report;
pub mod special;
mod welch;

pub use correlation::{
    average_ranks, pearson, pop_freq_correlation, spearman, write_pop_freq_csv, PopFreqSeries,
};
pub use report::{
    build_group_report, render_markdown, write_report_csv, Comparison, GroupReport, GroupSummary,
    Metric, SIGNIFICANCE_LEVEL,
};
pub use welch::{welch_t_test, TTest};
