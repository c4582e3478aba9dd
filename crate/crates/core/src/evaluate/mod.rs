//! Scoring, benchmarking, significance analysis and reporting.

mod benchmark;
mod metrics;
mod pca;
mod report;
mod stats;

pub use benchmark::{
    cell_path, run_benchmark, BenchmarkMethod, BenchmarkOptions, CellStatus, DatasetInfo,
    DtwMethod, EmbeddingMethod, EvaluationReport, GroupMeans, Metric, RunResult,
};
pub use metrics::{accuracy, balanced_accuracy};
pub use pca::{pca_project, Pca};
pub use report::{
    parse_table_csv, render_cdplot, render_csv, render_markdown, render_report, round_half_up, ModelMeta,
    ReportStyle, ResultsTable, RowCells, TableRow, CSV_HEADER, NO_AUG_SUFFIX, STAT_DIFF_SUFFIX,
};
pub use stats::{
    average_ranks, cd_analysis, cd_groups, holm_correction, mid_ranks, rank_order,
    score_correlation, wilcoxon_signed_rank, CdAnalysis, Correlation, WilcoxonResult,
    EXACT_MAX_N,
};
