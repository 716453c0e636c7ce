//! Quantifying language disparity in multilingual model evaluations.
//!
//! The crate fits a random-intercept linear mixed-effects model to
//! per-(model, language, task) evaluation scores, separating what a language
//! tends to score from what an individual model achieves. From the fit it
//! derives performance potentials, realisation ratios, model disparity
//! summaries, residual diagnostics, and robustness checks.
//!
//! Entry points:
//! - [`records`]: loading and validating score records, bundled fixture.
//! - [`lmm`]: the mixed-model fit ([`lmm::fit_lmm`]).
//! - [`disparity`]: potentials, realisation ratios, disparity summaries.
//! - [`diagnostics`]: residual tests, outlier-robustness refits.
//! - [`stattests`]: the statistical tests used by the diagnostics.
//! - [`report`]: CSV and JSON writers for every derived table.

pub mod diagnostics;
pub mod disparity;
pub mod error;
pub mod lmm;
pub mod records;
pub mod report;
pub mod stattests;

pub use diagnostics::{
    compare_fits, diagnose, robustness_refit, CompareResult, DiagnosticsReport, ResidualKind,
    RobustnessReport,
};
pub use disparity::{
    baseline_language_means, baseline_model_stats, language_potential, model_disparity,
    performance_potential, rank_divergence, realisation_ratios, DisparityReport, PotentialTable,
    RecordPrr,
};
pub use error::{Error, Result};
pub use lmm::{encode_design, fit_lmm, profile_deviance, DesignSpec, LmmFit};
pub use records::{
    load_records, mega_fixture, save_records, EvaluationRecord, RecordCollection, TaskId,
};
pub use stattests::{kendall_tau_b, levene, shapiro_wilk, spearman, LeveneCenter, TestResult};
