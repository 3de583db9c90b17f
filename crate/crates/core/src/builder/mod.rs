//! Test builder: turns a clip list and a config into sessions with injected
//! control questions, the platform input rows and the HIT app bundle.

mod bundle;
mod ccr;
mod plan;
mod rows;
mod trapping;

pub use bundle::{
    count_scale_levels, env_pair_items, escape_html, render_hit_app, AppBundle, Templates, CLIENT_SCRIPT,
    HIT_APP_TEMPLATE, STORAGE_KEY_ENVIRONMENT, STORAGE_KEY_FINGERPRINT, STORAGE_KEY_QUALIFICATION,
};
pub use ccr::{build_ccr_pairs, CcrPairs, Pair};
pub use plan::{build_test_plan, Question, QuestionKind, SessionSpec, TestPlan};
pub use rows::{emit_input_rows, input_header, parse_input_rows, RowControl, RowItem, SessionRow};
pub use trapping::{create_trapping_clip, Pcm, TrappingClip};
