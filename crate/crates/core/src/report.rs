//! File writers for the derived tables.
//!
//! CSV files carry floats with exactly six decimal places; JSON files are
//! pretty-printed with sorted map keys. Both are deterministic byte for
//! byte given equal inputs. The fit itself serializes through
//! [`LmmFit::to_json`], which keeps 17 significant digits so the parameters
//! survive a round trip exactly. Non-finite values in the diagnostic JSON
//! documents serialize as `null`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{CompareResult, DiagnosticsReport, QqPoint, RobustnessReport};
use crate::disparity::{
    BaselineLanguage, BaselineModel, DisparityReport, PotentialTable, RecordPrr,
};
use crate::error::{Error, Result};
use crate::lmm::LmmFit;

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::InputFormat {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn csv_row<W: std::io::Write>(w: &mut csv::Writer<W>, path: &Path, fields: &[&str]) -> Result<()> {
    w.write_record(fields).map_err(|e| Error::InputFormat {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn finish_csv<W: std::io::Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput {
        detail: format!("cannot serialize {}: {e}", path.display()),
    })?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes the fit parameters as JSON with 17 significant digits.
pub fn write_fit_json(fit: &LmmFit, path: &Path) -> Result<()> {
    std::fs::write(path, fit.to_json())?;
    Ok(())
}

/// Language table: potential and raw-mean rankings side by side, one row per
/// language in potential-rank order. Both inputs must cover the same
/// languages.
pub fn write_language_potential_csv(
    potential: &PotentialTable,
    baseline: &[BaselineLanguage],
    path: &Path,
) -> Result<()> {
    let base: BTreeMap<&str, &BaselineLanguage> =
        baseline.iter().map(|b| (b.language.as_str(), b)).collect();
    let only_potential: Vec<String> = potential
        .entries
        .iter()
        .filter(|e| !base.contains_key(e.language.as_str()))
        .map(|e| e.language.clone())
        .collect();
    if !only_potential.is_empty() || base.len() != potential.entries.len() {
        let in_potential: std::collections::BTreeSet<&str> = potential
            .entries
            .iter()
            .map(|e| e.language.as_str())
            .collect();
        return Err(Error::SetMismatch {
            only_a: base
                .keys()
                .filter(|k| !in_potential.contains(*k))
                .map(|k| k.to_string())
                .collect(),
            only_b: only_potential,
        });
    }
    let mut w = csv_writer(path)?;
    csv_row(
        &mut w,
        path,
        &[
            "Language",
            "Potential",
            "PotentialRank",
            "MeanScore",
            "MeanScoreRank",
        ],
    )?;
    for e in &potential.entries {
        let b = base[e.language.as_str()];
        csv_row(
            &mut w,
            path,
            &[
                &e.language,
                &f6(e.potential),
                &e.rank.to_string(),
                &f6(b.mean_score),
                &b.rank.to_string(),
            ],
        )?;
    }
    finish_csv(w)
}

/// Per-model disparity summary, one row per model in id order.
pub fn write_model_disparity_csv(report: &DisparityReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, &["Model", "MeanPRR", "StdPRR", "CVPRR"])?;
    for m in &report.models {
        csv_row(
            &mut w,
            path,
            &[&m.model, &f6(m.mean_prr), &f6(m.std_prr), &f6(m.cv_prr)],
        )?;
    }
    finish_csv(w)
}

/// Every record with its potential and realisation ratio, in record order.
pub fn write_prr_records_csv(ratios: &[RecordPrr], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    csv_row(
        &mut w,
        path,
        &[
            "Model",
            "Language",
            "Dataset",
            "Metric",
            "Score",
            "Potential",
            "PRR",
        ],
    )?;
    for r in ratios {
        csv_row(
            &mut w,
            path,
            &[
                &r.model,
                &r.language,
                r.task.dataset(),
                r.task.metric(),
                &f6(r.score),
                &f6(r.potential),
                &f6(r.ratio),
            ],
        )?;
    }
    finish_csv(w)
}

/// Q-Q plot data, one row per point in quantile order.
pub fn write_qq_csv(points: &[QqPoint], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, &["Theoretical", "Sample"])?;
    for p in points {
        csv_row(&mut w, path, &[&f6(p.theoretical), &f6(p.sample)])?;
    }
    finish_csv(w)
}

/// Residuals against fitted values, in record order.
pub fn write_residuals_vs_fitted_csv(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, &["Fitted", "Residual"])?;
    for p in &report.residuals_vs_fitted {
        csv_row(&mut w, path, &[&f6(p.fitted), &f6(p.residual)])?;
    }
    finish_csv(w)
}

/// Raw mean score per language, in rank order.
pub fn write_baseline_languages_csv(baseline: &[BaselineLanguage], path: &Path) -> Result<()> {
    let mut rows: Vec<&BaselineLanguage> = baseline.iter().collect();
    rows.sort_by_key(|b| b.rank);
    let mut w = csv_writer(path)?;
    csv_row(&mut w, path, &["Language", "MeanScore", "Rank", "Records"])?;
    for b in rows {
        csv_row(
            &mut w,
            path,
            &[
                &b.language,
                &f6(b.mean_score),
                &b.rank.to_string(),
                &b.n_records.to_string(),
            ],
        )?;
    }
    finish_csv(w)
}

/// Raw score moments per model, in model id order.
pub fn write_baseline_models_csv(models: &[BaselineModel], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    csv_row(
        &mut w,
        path,
        &["Model", "MeanScore", "StdScore", "CVScore", "Records"],
    )?;
    for m in models {
        csv_row(
            &mut w,
            path,
            &[
                &m.model,
                &f6(m.mean_score),
                &f6(m.std_score),
                &f6(m.cv_score),
                &m.n_records.to_string(),
            ],
        )?;
    }
    finish_csv(w)
}

/// Full diagnostics report as JSON.
pub fn write_diagnostics_json(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

/// Robustness comparison as JSON.
pub fn write_robustness_json(report: &RobustnessReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

/// Cross-fit rank agreement as JSON.
pub fn write_compare_json(result: &CompareResult, path: &Path) -> Result<()> {
    write_json(result, path)
}
