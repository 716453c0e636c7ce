//! Performance potentials, realisation ratios, and disparity summaries.
//!
//! The fitted model separates a language-and-task signal from per-model
//! offsets. The potential of a cell is the score a typical model (random
//! effect zero) is expected to reach there; a language's potential averages
//! that over tasks. Dividing an observed score by its cell potential gives a
//! performance realisation ratio (PRR), and per-model moments of the PRR
//! summarise how evenly a model serves its languages.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmm::LmmFit;
use crate::records::{RecordCollection, TaskId};

/// Expected score of a (language, task) cell under a typical model.
pub fn performance_potential(fit: &LmmFit, language: &str, task: &TaskId) -> Result<f64> {
    fit.predict_cell(language, task)
}

/// One language's potential and its rank among all languages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguagePotential {
    pub language: String,
    pub potential: f64,
    /// 1-based rank, highest potential first; ties break on language code.
    pub rank: usize,
}

/// Language potentials under a fixed average task effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialTable {
    /// Average task offset added to every language potential.
    pub mean_task_effect: f64,
    /// Whether the reference task's zero offset entered the average.
    pub includes_reference_task: bool,
    /// Entries sorted by rank.
    pub entries: Vec<LanguagePotential>,
}

impl PotentialTable {
    pub fn get(&self, language: &str) -> Option<&LanguagePotential> {
        self.entries.iter().find(|e| e.language == language)
    }
}

/// Ranks languages by potential: intercept plus language offset plus the
/// average task offset.
///
/// By default the average runs over the non-reference tasks only, keeping it
/// comparable with the task coefficients it is built from. Passing
/// `include_reference_task` also counts the reference task's zero offset,
/// which lowers the average but shifts every language equally, so ranks are
/// unchanged.
pub fn language_potential(fit: &LmmFit, include_reference_task: bool) -> PotentialTable {
    let reference = fit.reference_task();
    let non_reference: Vec<f64> = fit
        .beta
        .iter()
        .filter(|(task, _)| *task != reference)
        .map(|(_, v)| *v)
        .collect();
    let divisor = if include_reference_task {
        non_reference.len() + 1
    } else {
        non_reference.len()
    };
    let mean_task_effect = if divisor == 0 {
        0.0
    } else {
        non_reference.iter().sum::<f64>() / divisor as f64
    };

    let mut entries: Vec<LanguagePotential> = fit
        .alpha
        .iter()
        .map(|(language, offset)| LanguagePotential {
            language: language.clone(),
            potential: fit.mu + offset + mean_task_effect,
            rank: 0,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.potential
            .total_cmp(&a.potential)
            .then_with(|| a.language.cmp(&b.language))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    PotentialTable {
        mean_task_effect,
        includes_reference_task: include_reference_task,
        entries,
    }
}

/// One record's score set against the potential of its cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordPrr {
    pub model: String,
    pub language: String,
    pub task: TaskId,
    pub score: f64,
    pub potential: f64,
    /// score / potential.
    pub ratio: f64,
}

/// Performance realisation ratio of every record in the collection.
///
/// Every (language, task) level in the collection must be known to the fit,
/// and every cell potential must be strictly positive for the ratio to mean
/// anything; non-positive cells are collected into one error.
pub fn realisation_ratios(fit: &LmmFit, c: &RecordCollection) -> Result<Vec<RecordPrr>> {
    let mut out = Vec::with_capacity(c.len());
    let mut bad_cells = BTreeSet::new();
    for r in c.records() {
        let task = r.task_id();
        let potential = fit.predict_cell(&r.language, &task)?;
        if potential <= 0.0 {
            bad_cells.insert(format!("{}:{}", r.language, task));
            continue;
        }
        out.push(RecordPrr {
            model: r.model.clone(),
            language: r.language.clone(),
            task,
            score: r.score,
            potential,
            ratio: r.score / potential,
        });
    }
    if !bad_cells.is_empty() {
        return Err(Error::NonPositivePotential {
            cells: bad_cells.into_iter().collect(),
        });
    }
    Ok(out)
}

/// PRR moments for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDisparity {
    pub model: String,
    pub n_records: usize,
    pub mean_prr: f64,
    /// Sample standard deviation (n - 1 divisor).
    pub std_prr: f64,
    /// Coefficient of variation: std / mean. Lower means more even.
    pub cv_prr: f64,
}

/// Per-model disparity summary plus the two orderings read off it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisparityReport {
    /// Sorted by model id.
    pub models: Vec<ModelDisparity>,
    /// Model ids by mean PRR, best first; ties break on model id.
    pub mean_prr_ranking: Vec<String>,
    /// Model ids by CV of PRR, most even first; ties break on model id.
    pub cv_prr_ranking: Vec<String>,
}

impl DisparityReport {
    pub fn get(&self, model: &str) -> Option<&ModelDisparity> {
        self.models.iter().find(|m| m.model == model)
    }
}

/// Sample standard deviation with the n - 1 divisor. Requires n >= 2.
fn sample_std(values: &[f64], mean: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Summarises realisation ratios per model.
///
/// Every model needs at least two ratios for the sample standard deviation,
/// and a non-zero mean for the coefficient of variation.
pub fn model_disparity(ratios: &[RecordPrr]) -> Result<DisparityReport> {
    if ratios.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let mut by_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratios {
        by_model.entry(&r.model).or_default().push(r.ratio);
    }
    let mut models = Vec::with_capacity(by_model.len());
    for (model, values) in &by_model {
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                model: model.to_string(),
                records: values.len(),
            });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if mean == 0.0 {
            return Err(Error::DegenerateSample {
                detail: format!("mean realisation ratio of model '{model}' is zero"),
            });
        }
        let std = sample_std(values, mean);
        models.push(ModelDisparity {
            model: model.to_string(),
            n_records: values.len(),
            mean_prr: mean,
            std_prr: std,
            cv_prr: std / mean,
        });
    }
    let mut by_mean: Vec<&ModelDisparity> = models.iter().collect();
    by_mean.sort_by(|a, b| {
        b.mean_prr
            .total_cmp(&a.mean_prr)
            .then_with(|| a.model.cmp(&b.model))
    });
    let mut by_cv: Vec<&ModelDisparity> = models.iter().collect();
    by_cv.sort_by(|a, b| {
        a.cv_prr
            .total_cmp(&b.cv_prr)
            .then_with(|| a.model.cmp(&b.model))
    });
    Ok(DisparityReport {
        mean_prr_ranking: by_mean.into_iter().map(|m| m.model.clone()).collect(),
        cv_prr_ranking: by_cv.into_iter().map(|m| m.model.clone()).collect(),
        models,
    })
}

/// One language's raw mean score and its rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineLanguage {
    pub language: String,
    pub n_records: usize,
    pub mean_score: f64,
    /// 1-based rank, highest mean first; ties break on language code.
    pub rank: usize,
}

/// Mean raw score per language, the model-free ranking the mixed model is
/// compared against. `task` restricts the average to one task.
pub fn baseline_language_means(
    c: &RecordCollection,
    task: Option<&TaskId>,
) -> Result<Vec<BaselineLanguage>> {
    let records: Vec<_> = match task {
        Some(t) => {
            let subset: Vec<_> = c.records().iter().filter(|r| &r.task_id() == t).collect();
            if subset.is_empty() {
                return Err(Error::UnknownLevel {
                    kind: "task".to_string(),
                    value: t.canonical().to_string(),
                });
            }
            subset
        }
        None => c.records().iter().collect(),
    };
    if records.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let mut by_language: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_language.entry(&r.language).or_default().push(r.score);
    }
    let mut out: Vec<BaselineLanguage> = by_language
        .iter()
        .map(|(language, values)| BaselineLanguage {
            language: language.to_string(),
            n_records: values.len(),
            mean_score: values.iter().sum::<f64>() / values.len() as f64,
            rank: 0,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_score
            .total_cmp(&a.mean_score)
            .then_with(|| a.language.cmp(&b.language))
    });
    for (i, e) in out.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(out)
}

/// Raw-score moments for one model, no potential normalisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineModel {
    pub model: String,
    pub n_records: usize,
    pub mean_score: f64,
    pub std_score: f64,
    pub cv_score: f64,
}

/// Mean, std, and CV of raw scores per model. The CV of raw scores mixes
/// task difficulty into the spread, which is what the PRR normalisation
/// removes; this is the comparison point. `task` restricts to one task.
pub fn baseline_model_stats(
    c: &RecordCollection,
    task: Option<&TaskId>,
) -> Result<Vec<BaselineModel>> {
    let records: Vec<_> = match task {
        Some(t) => {
            let subset: Vec<_> = c.records().iter().filter(|r| &r.task_id() == t).collect();
            if subset.is_empty() {
                return Err(Error::UnknownLevel {
                    kind: "task".to_string(),
                    value: t.canonical().to_string(),
                });
            }
            subset
        }
        None => c.records().iter().collect(),
    };
    if records.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let mut by_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_model.entry(&r.model).or_default().push(r.score);
    }
    let mut out = Vec::with_capacity(by_model.len());
    for (model, values) in &by_model {
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                model: model.to_string(),
                records: values.len(),
            });
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if mean == 0.0 {
            return Err(Error::DegenerateSample {
                detail: format!("mean score of model '{model}' is zero"),
            });
        }
        let std = sample_std(values, mean);
        out.push(BaselineModel {
            model: model.to_string(),
            n_records: values.len(),
            mean_score: mean,
            std_score: std,
            cv_score: std / mean,
        });
    }
    Ok(out)
}

/// How far a language's raw-mean rank sits from its potential rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDivergence {
    pub language: String,
    pub baseline_rank: usize,
    pub potential_rank: usize,
    /// baseline_rank - potential_rank: positive when the model ranks the
    /// language higher than its raw mean does.
    pub delta: i64,
}

/// Pairs each language's baseline rank with its potential rank, sorted by
/// absolute divergence (largest first, ties by language code). The two
/// inputs must cover exactly the same languages.
pub fn rank_divergence(
    baseline: &[BaselineLanguage],
    potential: &PotentialTable,
) -> Result<Vec<RankDivergence>> {
    let base_set: BTreeSet<&str> = baseline.iter().map(|b| b.language.as_str()).collect();
    let pot_set: BTreeSet<&str> = potential
        .entries
        .iter()
        .map(|e| e.language.as_str())
        .collect();
    if base_set != pot_set {
        return Err(Error::SetMismatch {
            only_a: base_set
                .difference(&pot_set)
                .map(|s| s.to_string())
                .collect(),
            only_b: pot_set
                .difference(&base_set)
                .map(|s| s.to_string())
                .collect(),
        });
    }
    let pot_rank: BTreeMap<&str, usize> = potential
        .entries
        .iter()
        .map(|e| (e.language.as_str(), e.rank))
        .collect();
    let mut out: Vec<RankDivergence> = baseline
        .iter()
        .map(|b| {
            let potential_rank = pot_rank[b.language.as_str()];
            RankDivergence {
                language: b.language.clone(),
                baseline_rank: b.rank,
                potential_rank,
                delta: b.rank as i64 - potential_rank as i64,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.delta
            .abs()
            .cmp(&a.delta.abs())
            .then_with(|| a.language.cmp(&b.language))
    });
    Ok(out)
}
