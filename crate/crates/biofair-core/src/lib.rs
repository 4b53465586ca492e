//! Fairness auditing for biometric verification score sets.
//!
//! Given similarity scores labeled genuine/impostor with demographic
//! attributes, this crate computes threshold-dependent error rates
//! (tgr/tir/fgr/fir) over every achievable decision threshold, resolves
//! named operating points (EER, fgr targets, zero-error points), evaluates
//! three group-fairness criteria (equalised odds, statistical parity,
//! predictive parity) at shared thresholds across demographic and
//! intersectional groups, and brute-force-verifies that the three criteria
//! only hold simultaneously in degenerate regimes (trivial or perfect
//! classifiers, or near-equal base rates).
//!
//! The `parallel` feature (default) runs threshold sweeps, audits, and
//! synthetic trials on a rayon pool; disabling it yields a dependency-free
//! sequential build with identical outputs.

mod error;
mod par;

pub mod fairness;
pub mod impossibility;
pub mod rates;
pub mod report;
pub mod schema;
pub mod score;
pub mod synth;

pub use error::{Error, Result};
pub use fairness::{
    audit, equalised_odds, group_score_stats, predictive_parity, statistical_parity, Criterion,
    CriterionGap, GroupScoreStats, DEFAULT_EPSILON,
};
pub use impossibility::{
    bayes_residual, run_synthetic_trials, verify, ImpossibilityVerdict, SatisfactionClass,
};
pub use rates::{
    count_confusion, rate_curve, resolve_operating_point, ConfusionCounts, OperatingPoint,
    OperatingPointKind, RateCurve, RateSet,
};
pub use report::FairnessReport;
pub use schema::{demographic_summary, partition, AttributeSchema, DemographicSummary, GroupPartition};
pub use score::{load_scores, parse_scores, write_scores, AttrValue, Label, LoadedScores, ScoreRecord};
pub use synth::{generate, preset_unequal_base_rates, PopulationSpec, GENERATOR_NAME};
