//! Opinion-score aggregation and the cross-run / cross-dataset statistics:
//! correlations, RMSE, polynomial mapping, ICC(2,1) and Fisher-z tests.

mod aggregate;
mod correlation;
mod filters;
mod fisher;
mod icc;
mod mapping;
mod resample;

pub use aggregate::{aggregate, cmos, dmos, dmos_map, normalized_ccr, Aggregate, Aggregation, GroupBy};
pub use correlation::{fractional_ranks, pcc, rmse, srcc};
pub use filters::{
    analyze_filters, compare_runs, condition_scores, CriterionAnalysis, FilterAnalysis, GroupAnalysis, RunComparison,
    RunPair, ScreenedRun, Skipped,
};
pub use fisher::{fisher_z_test, FisherZ};
pub use icc::{icc_2_1, IccResult, RunMatrix};
pub use mapping::{fit_mapping, MappingModel};
pub use resample::subsample_votes;
