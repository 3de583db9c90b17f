//! Two-tier screening of submissions: acceptance for payment, then
//! usability of the ratings for analysis.

mod checks;
mod criteria;
mod screen;

pub use checks::{check_acceptance, check_submission, check_usability, headset_flag, CleansingVerdict};
pub use criteria::{decide, Criterion, CriterionFlags, Flag, Grouping};
pub use screen::{
    screen_batch, split_by_criterion, AssignmentRef, BonusGrant, CleansingReport, Rejection, Screening, Split,
    UtilityReport,
};
