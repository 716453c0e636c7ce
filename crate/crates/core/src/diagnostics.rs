//! Model checking: residual tests, Q-Q data, outlier robustness, and
//! cross-fit rank agreement.
//!
//! The mixed model assumes normal noise with one variance everywhere and
//! normal random intercepts. [`diagnose`] runs the corresponding tests and
//! collects plot-ready residual data. [`robustness_refit`] re-runs the whole
//! disparity pipeline without the worst-fitting records to show how stable
//! the model orderings are, and [`compare_fits`] correlates the language
//! rankings of two fits.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::disparity::{language_potential, model_disparity, realisation_ratios, DisparityReport};
use crate::error::{Error, Result};
use crate::lmm::{fit_lmm, LmmFit};
use crate::records::{RecordCollection, TaskId};
use crate::stattests::{
    dist, kendall_tau_b, levene, shapiro_wilk, spearman, LeveneCenter, TestResult,
};

/// Which residual a diagnostic runs on.
///
/// Conditional residuals subtract the predicted model intercepts and isolate
/// the noise term; marginal residuals leave the model effects in and mix the
/// two variance components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Conditional,
    Marginal,
}

/// One point of a normal Q-Q plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

/// One residual paired with its fitted value, in record order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedResidual {
    pub fitted: f64,
    pub residual: f64,
}

/// Assumption checks and plot data for one fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub residual_kind: ResidualKind,
    pub levene_center: LeveneCenter,
    /// Shapiro-Wilk on the residuals.
    pub residual_normality: TestResult,
    /// Shapiro-Wilk on the predicted random intercepts; absent when there
    /// are fewer than three models.
    pub random_effect_normality: Option<TestResult>,
    /// Levene across languages on the residuals.
    pub variance_homogeneity: TestResult,
    pub qq_residuals: Vec<QqPoint>,
    pub qq_random_effects: Vec<QqPoint>,
    pub residuals_vs_fitted: Vec<FittedResidual>,
}

/// Sorted sample values against normal quantiles at the Blom plotting
/// positions (i - 3/8) / (n + 1/4).
fn qq_points(values: &[f64]) -> Vec<QqPoint> {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, sample)| QqPoint {
            theoretical: dist::normal_quantile((i as f64 + 1.0 - 0.375) / (n + 0.25)),
            sample,
        })
        .collect()
}

/// Runs the assumption checks for a fit.
///
/// `c` must be the collection the model was fitted to; the residual vectors
/// are aligned with its record order. Normality of the residuals and of the
/// random intercepts is tested with Shapiro-Wilk, variance homogeneity
/// across languages with a Levene test on the residuals. Languages need at
/// least two records each for the Levene test to be defined.
pub fn diagnose(
    fit: &LmmFit,
    c: &RecordCollection,
    kind: ResidualKind,
    center: LeveneCenter,
) -> Result<DiagnosticsReport> {
    if c.len() != fit.conditional_residuals.len() {
        return Err(Error::InvalidParameter {
            detail: format!(
                "collection has {} records but the fit has {}",
                c.len(),
                fit.conditional_residuals.len()
            ),
        });
    }
    let residuals: &[f64] = match kind {
        ResidualKind::Conditional => &fit.conditional_residuals,
        ResidualKind::Marginal => &fit.marginal_residuals,
    };

    let residual_normality = shapiro_wilk(residuals)?;

    let u_values: Vec<f64> = fit.u.values().copied().collect();
    let random_effect_normality = if u_values.len() >= 3 {
        Some(shapiro_wilk(&u_values)?)
    } else {
        None
    };

    let mut by_language: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (r, &resid) in c.records().iter().zip(residuals) {
        by_language.entry(&r.language).or_default().push(resid);
    }
    let groups: Vec<&[f64]> = by_language.values().map(|v| v.as_slice()).collect();
    let variance_homogeneity = levene(&groups, center)?;

    Ok(DiagnosticsReport {
        residual_kind: kind,
        levene_center: center,
        residual_normality,
        random_effect_normality,
        variance_homogeneity,
        qq_residuals: qq_points(residuals),
        qq_random_effects: qq_points(&u_values),
        residuals_vs_fitted: fit
            .fitted_values
            .iter()
            .zip(residuals)
            .map(|(&fitted, &residual)| FittedResidual { fitted, residual })
            .collect(),
    })
}

/// A record removed by the robustness refit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRecord {
    /// Index into the original collection's record order.
    pub index: usize,
    pub model: String,
    pub language: String,
    pub task: TaskId,
    pub score: f64,
    /// Conditional residual under the full fit.
    pub residual: f64,
}

/// How one model's rank moved between the full and the reduced fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankShift {
    pub model: String,
    pub before: usize,
    pub after: usize,
}

/// Full and reduced disparity results side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub k: usize,
    /// Removed records in drop order (largest |residual| first).
    pub dropped: Vec<DroppedRecord>,
    pub before: DisparityReport,
    pub after: DisparityReport,
    /// Mean-PRR rank of each model before and after, in before order.
    /// Models absent from either side are skipped.
    pub mean_rank_shifts: Vec<RankShift>,
    /// CV-PRR rank shifts, same convention.
    pub cv_rank_shifts: Vec<RankShift>,
}

impl RobustnessReport {
    pub fn mean_ranking_changed(&self) -> bool {
        self.mean_rank_shifts.iter().any(|s| s.before != s.after)
    }

    pub fn cv_ranking_changed(&self) -> bool {
        self.cv_rank_shifts.iter().any(|s| s.before != s.after)
    }
}

fn rank_shifts(before: &[String], after: &[String]) -> Vec<RankShift> {
    let after_rank: BTreeMap<&str, usize> = after
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i + 1))
        .collect();
    before
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            after_rank.get(m.as_str()).map(|&a| RankShift {
                model: m.clone(),
                before: i + 1,
                after: a,
            })
        })
        .collect()
}

/// Refits without the `k` records the model explains worst and reports both
/// disparity summaries.
///
/// Records are ranked by absolute conditional residual, ties resolved in
/// record order. `k = 0` reports the full fit on both sides. `k` must leave
/// at least as many records as the design has columns.
pub fn robustness_refit(c: &RecordCollection, k: usize) -> Result<RobustnessReport> {
    let fit = fit_lmm(c)?;
    let before = model_disparity(&realisation_ratios(&fit, c)?)?;

    let columns = fit.design.column_count();
    if k > c.len().saturating_sub(columns) {
        return Err(Error::InvalidParameter {
            detail: format!(
                "cannot drop {k} of {} records with a {columns}-column design",
                c.len()
            ),
        });
    }
    if k == 0 {
        return Ok(RobustnessReport {
            k,
            dropped: Vec::new(),
            mean_rank_shifts: rank_shifts(&before.mean_prr_ranking, &before.mean_prr_ranking),
            cv_rank_shifts: rank_shifts(&before.cv_prr_ranking, &before.cv_prr_ranking),
            after: before.clone(),
            before,
        });
    }

    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| {
        fit.conditional_residuals[b]
            .abs()
            .total_cmp(&fit.conditional_residuals[a].abs())
            .then_with(|| a.cmp(&b))
    });
    let drop_order = &order[..k];
    let dropped: Vec<DroppedRecord> = drop_order
        .iter()
        .map(|&i| {
            let r = &c.records()[i];
            DroppedRecord {
                index: i,
                model: r.model.clone(),
                language: r.language.clone(),
                task: r.task_id(),
                score: r.score,
                residual: fit.conditional_residuals[i],
            }
        })
        .collect();

    let mut keep = vec![true; c.len()];
    for &i in drop_order {
        keep[i] = false;
    }
    let reduced = RecordCollection::new(
        c.records()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, r)| r.clone())
            .collect(),
    )?;
    let refit = fit_lmm(&reduced)?;
    let after = model_disparity(&realisation_ratios(&refit, &reduced)?)?;

    Ok(RobustnessReport {
        k,
        dropped,
        mean_rank_shifts: rank_shifts(&before.mean_prr_ranking, &after.mean_prr_ranking),
        cv_rank_shifts: rank_shifts(&before.cv_prr_ranking, &after.cv_prr_ranking),
        before,
        after,
    })
}

/// Rank agreement between the language potentials of two fits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareResult {
    /// Languages known to both fits, sorted.
    pub shared_languages: Vec<String>,
    pub spearman: TestResult,
    pub kendall: TestResult,
}

/// Correlates the language potentials of two fits over their shared
/// languages. Needs at least three shared languages; both correlations are
/// rank-based, so the task-average convention cancels out.
pub fn compare_fits(a: &LmmFit, b: &LmmFit) -> Result<CompareResult> {
    let ta = language_potential(a, false);
    let tb = language_potential(b, false);
    let in_b: BTreeMap<&str, f64> = tb
        .entries
        .iter()
        .map(|e| (e.language.as_str(), e.potential))
        .collect();
    let mut shared: Vec<(&str, f64, f64)> = ta
        .entries
        .iter()
        .filter_map(|e| {
            in_b.get(e.language.as_str())
                .map(|&pb| (e.language.as_str(), e.potential, pb))
        })
        .collect();
    shared.sort_by(|x, y| x.0.cmp(y.0));
    if shared.len() < 3 {
        return Err(Error::InsufficientOverlap {
            shared: shared.len(),
        });
    }
    let xs: Vec<f64> = shared.iter().map(|s| s.1).collect();
    let ys: Vec<f64> = shared.iter().map(|s| s.2).collect();
    Ok(CompareResult {
        shared_languages: shared.iter().map(|s| s.0.to_string()).collect(),
        spearman: spearman(&xs, &ys)?,
        kendall: kendall_tau_b(&xs, &ys)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::EvaluationRecord;
    use approx::assert_abs_diff_eq;

    fn rec(m: &str, l: &str, t: &str, score: f64) -> EvaluationRecord {
        EvaluationRecord::new(m, l, "ds", t, score)
    }

    /// Three models, three languages, two tasks, mild noise.
    fn sample_collection() -> RecordCollection {
        let langs = ["aa", "bb", "cc"];
        let lang_off = [0.0, 8.0, -5.0];
        let tasks = ["acc", "f1"];
        let task_off = [0.0, 12.0];
        let model_off = [3.0, 0.0, -3.0];
        let noise = [
            0.3, -0.4, 0.2, -0.1, 0.5, -0.3, 0.1, -0.2, 0.4, -0.5, 0.2, -0.1, 0.3, -0.3, 0.1, -0.4,
            0.2, -0.2,
        ];
        let mut records = Vec::new();
        let mut k = 0;
        for (mi, m) in ["m1", "m2", "m3"].iter().enumerate() {
            for (li, l) in langs.iter().enumerate() {
                for (ti, t) in tasks.iter().enumerate() {
                    let score = 50.0 + lang_off[li] + task_off[ti] + model_off[mi] + noise[k];
                    records.push(rec(m, l, t, score));
                    k += 1;
                }
            }
        }
        RecordCollection::new(records).unwrap()
    }

    #[test]
    fn qq_positions_are_blom_and_sorted() {
        let points = qq_points(&[3.0, 1.0, 2.0, 5.0, 4.0]);
        let samples: Vec<f64> = points.iter().map(|p| p.sample).collect();
        assert_eq!(samples, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        // Blom position of the first of five points is 0.625 / 5.25
        assert_abs_diff_eq!(
            points[0].theoretical,
            dist::normal_quantile(0.625 / 5.25),
            epsilon = 1e-15
        );
        // symmetric positions give symmetric quantiles
        assert_abs_diff_eq!(
            points[0].theoretical,
            -points[4].theoretical,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(points[2].theoretical, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diagnose_covers_all_sections() {
        let c = sample_collection();
        let fit = fit_lmm(&c).unwrap();
        let report = diagnose(&fit, &c, ResidualKind::Conditional, LeveneCenter::Median).unwrap();
        assert_eq!(report.residual_kind, ResidualKind::Conditional);
        assert_eq!(report.qq_residuals.len(), c.len());
        assert_eq!(report.qq_random_effects.len(), 3);
        assert_eq!(report.residuals_vs_fitted.len(), c.len());
        assert!(report.random_effect_normality.is_some());
        assert!(report.residual_normality.p_value > 0.0);
        // fitted + residual reproduces the observed score
        for (fr, r) in report.residuals_vs_fitted.iter().zip(c.records()) {
            assert_abs_diff_eq!(fr.fitted + fr.residual, r.score, epsilon = 1e-9);
        }
    }

    #[test]
    fn diagnose_marginal_uses_marginal_residuals() {
        let c = sample_collection();
        let fit = fit_lmm(&c).unwrap();
        let report = diagnose(&fit, &c, ResidualKind::Marginal, LeveneCenter::Median).unwrap();
        let mut expected = fit.marginal_residuals.clone();
        expected.sort_by(f64::total_cmp);
        let got: Vec<f64> = report.qq_residuals.iter().map(|p| p.sample).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn diagnose_with_two_models_skips_random_effect_test() {
        let c = RecordCollection::new(vec![
            rec("m1", "aa", "acc", 10.0),
            rec("m1", "aa", "f1", 20.0),
            rec("m1", "bb", "acc", 30.0),
            rec("m1", "bb", "f1", 41.0),
            rec("m2", "aa", "acc", 12.0),
            rec("m2", "aa", "f1", 22.5),
            rec("m2", "bb", "acc", 31.0),
            rec("m2", "bb", "f1", 44.0),
        ])
        .unwrap();
        let fit = fit_lmm(&c).unwrap();
        let report = diagnose(&fit, &c, ResidualKind::Conditional, LeveneCenter::Median).unwrap();
        assert!(report.random_effect_normality.is_none());
        assert_eq!(report.qq_random_effects.len(), 2);
    }

    #[test]
    fn diagnose_rejects_mismatched_collection() {
        let c = sample_collection();
        let fit = fit_lmm(&c).unwrap();
        let other = c.filter(|r| r.language != "aa");
        assert!(matches!(
            diagnose(
                &fit,
                &other,
                ResidualKind::Conditional,
                LeveneCenter::Median
            ),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn robustness_zero_keeps_everything() {
        let c = sample_collection();
        let report = robustness_refit(&c, 0).unwrap();
        assert!(report.dropped.is_empty());
        assert_eq!(report.before, report.after);
        assert!(!report.mean_ranking_changed());
        assert!(!report.cv_ranking_changed());
    }

    #[test]
    fn robustness_drops_the_planted_outlier_first() {
        let mut records: Vec<EvaluationRecord> = sample_collection().records().to_vec();
        // push one score far off the additive structure
        records[7].score += 40.0;
        let c = RecordCollection::new(records).unwrap();
        let report = robustness_refit(&c, 2).unwrap();
        assert_eq!(report.dropped.len(), 2);
        assert_eq!(report.dropped[0].index, 7);
        assert!(report.dropped[0].residual > 10.0);
        assert!(
            report.dropped[0].residual.abs() >= report.dropped[1].residual.abs(),
            "drop order must follow |residual|"
        );
    }

    #[test]
    fn robustness_rejects_excessive_k() {
        let c = sample_collection();
        assert!(robustness_refit(&c, 4).is_ok());
        // 18 records, 4 design columns: at most 14 can go
        assert!(matches!(
            robustness_refit(&c, 15),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn compare_fit_with_itself_is_perfect_agreement() {
        let c = sample_collection();
        let fit = fit_lmm(&c).unwrap();
        let result = compare_fits(&fit, &fit).unwrap();
        assert_eq!(result.shared_languages, vec!["aa", "bb", "cc"]);
        assert_abs_diff_eq!(result.spearman.statistic, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.kendall.statistic, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn compare_requires_three_shared_languages() {
        let c = sample_collection();
        let fit = fit_lmm(&c).unwrap();
        let other = RecordCollection::new(vec![
            rec("m1", "aa", "acc", 10.0),
            rec("m1", "aa", "f1", 20.0),
            rec("m1", "zz", "acc", 30.0),
            rec("m1", "zz", "f1", 41.0),
            rec("m2", "aa", "acc", 12.0),
            rec("m2", "aa", "f1", 22.5),
            rec("m2", "zz", "acc", 31.0),
            rec("m2", "zz", "f1", 44.0),
        ])
        .unwrap();
        let fit_b = fit_lmm(&other).unwrap();
        assert!(matches!(
            compare_fits(&fit, &fit_b),
            Err(Error::InsufficientOverlap { shared: 1 })
        ));
    }
}
