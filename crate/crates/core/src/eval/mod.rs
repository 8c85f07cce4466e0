//! Leave-two-out cross-validation, the 2-vs-2 correlation test, per-feature
//! variance explained and the time-lag sweep.

mod cv;
mod pairwise;
mod report;
mod score;

pub use cv::{
    all_pairs, fit_fold, fold_pairs, lag_sweep, leave_two_out_cv, CvConfig, EvalReport, PairFilter,
};
pub use pairwise::{pair_correlation_test, pearson, PairResult, TIE_TOLERANCE};
pub use report::{
    write_gnuplot, write_pairs_csv, write_summary_json, write_sweep_csv, EvalSummary, TOP_FEATURES,
};
pub use score::{feature_score, rank_features, FeatureAccumulator, FeatureScores, RankedFeature};
