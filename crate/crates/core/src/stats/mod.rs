//! Exact tests and summary statistics for comparing groups of recorded
//! sessions.

mod describe;
mod fisher;
mod report;
mod wilcoxon;

pub use describe::{ci_mean, intervals_overlap, pearson, z_for_level, Pearson};
pub use fisher::{fisher_exact_2x2, FisherResult, Table2x2};
pub use report::{
    group_report, round_sig, write_csv, GroupReport, GroupSummary, MetricName, PairwiseTest, ParticipantMetrics,
    ReportOptions, METRICS,
};
pub use wilcoxon::{
    rank_sum_doubled, wilcoxon, wilcoxon_exact, Approximation, WilcoxonMethod, WilcoxonOptions, WilcoxonResult,
};

/// Whether data-parallel work runs on the rayon pool. Without the
/// `parallel` feature both variants run sequentially.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("{total} values exceed the exact-test cap of {cap}; request an approximation")]
    SampleTooLarge { total: usize, cap: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("samples have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("contingency table is empty")]
    EmptyTable,
}
