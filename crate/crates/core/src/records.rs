//! Score records and their container.
//!
//! A record is one observed score for a (model, language, task) cell, where a
//! task is a dataset-metric pair. The bundled MEGA fixture ships 1,364 such
//! records covering 13 models, 53 languages, and 15 tasks.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dataset-metric pair treated as one evaluation unit.
///
/// The canonical form is `dataset_metric`. Dataset names never contain an
/// underscore, so the canonical form splits unambiguously on the first `_`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskId {
    dataset: String,
    metric: String,
    canonical: String,
}

/// Serializes as the canonical `dataset_metric` string.
impl Serialize for TaskId {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical)
    }
}

impl TaskId {
    pub fn new(dataset: &str, metric: &str) -> Self {
        TaskId {
            dataset: dataset.to_string(),
            metric: metric.to_string(),
            canonical: format!("{dataset}_{metric}"),
        }
    }

    /// Parses the canonical `dataset_metric` form.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once('_') {
            Some((d, m)) if !d.is_empty() && !m.is_empty() => Ok(TaskId::new(d, m)),
            _ => Err(Error::InvalidInput {
                detail: format!("task id '{s}' is not of the form dataset_metric"),
            }),
        }
    }

    pub fn dataset(&self) -> &str {
        &self.dataset
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

/// Ordering follows the canonical string byte order, which is also the order
/// used to pick the reference task for treatment coding.
impl Ord for TaskId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl PartialOrd for TaskId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One observed score for a (model, language, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct EvaluationRecord {
    pub model: String,
    pub language: String,
    pub dataset: String,
    pub metric: String,
    pub score: f64,
}

impl EvaluationRecord {
    pub fn new(model: &str, language: &str, dataset: &str, metric: &str, score: f64) -> Self {
        EvaluationRecord {
            model: model.to_string(),
            language: language.to_string(),
            dataset: dataset.to_string(),
            metric: metric.to_string(),
            score,
        }
    }

    pub fn task_id(&self) -> TaskId {
        TaskId::new(&self.dataset, &self.metric)
    }
}

/// An ordered set of validated records plus their sorted category levels.
///
/// Validation rejects empty fields, non-finite scores, and duplicate
/// (model, language, task) keys. Record order is preserved; category levels
/// are sorted unique byte-wise, so the first language and first task are the
/// treatment-coding reference levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordCollection {
    records: Vec<EvaluationRecord>,
    languages: Vec<String>,
    tasks: Vec<TaskId>,
    models: Vec<String>,
}

impl RecordCollection {
    pub fn new(records: Vec<EvaluationRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (index, r) in records.iter().enumerate() {
            for (field, value) in [
                ("model", &r.model),
                ("language", &r.language),
                ("dataset", &r.dataset),
                ("metric", &r.metric),
            ] {
                if value.is_empty() {
                    return Err(Error::EmptyField {
                        index,
                        field: field.to_string(),
                    });
                }
            }
            if !r.score.is_finite() {
                return Err(Error::NonFiniteScore {
                    index,
                    model: r.model.clone(),
                    language: r.language.clone(),
                });
            }
            let key = (r.model.clone(), r.language.clone(), r.task_id());
            if !seen.insert(key) {
                return Err(Error::DuplicateRecord {
                    model: r.model.clone(),
                    language: r.language.clone(),
                    task: r.task_id().canonical().to_string(),
                });
            }
        }
        Ok(Self::from_validated(records))
    }

    fn from_validated(records: Vec<EvaluationRecord>) -> Self {
        let languages: BTreeSet<_> = records.iter().map(|r| r.language.clone()).collect();
        let tasks: BTreeSet<_> = records.iter().map(|r| r.task_id()).collect();
        let models: BTreeSet<_> = records.iter().map(|r| r.model.clone()).collect();
        RecordCollection {
            records,
            languages: languages.into_iter().collect(),
            tasks: tasks.into_iter().collect(),
            models: models.into_iter().collect(),
        }
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted unique language codes; the first is the reference language.
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Sorted unique task ids; the first is the reference task.
    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    /// Sorted unique model identifiers, the random-effect grouping.
    pub fn models(&self) -> &[String] {
        &self.models
    }

    /// New collection with the records satisfying `predicate`, in order.
    pub fn filter<F: FnMut(&EvaluationRecord) -> bool>(&self, mut predicate: F) -> Self {
        let kept: Vec<_> = self
            .records
            .iter()
            .filter(|r| predicate(r))
            .cloned()
            .collect();
        Self::from_validated(kept)
    }
}

/// Loads records from a `.json` or `.csv` file, dispatching on the extension.
pub fn load_records(path: &Path) -> Result<RecordCollection> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let records = match extension(path) {
        Some("json") => parse_json(&display, &text)?,
        Some("csv") => parse_csv(&display, &text)?,
        _ => {
            return Err(Error::InputFormat {
                path: display,
                detail: "unsupported extension (expected .json or .csv)".to_string(),
            })
        }
    };
    RecordCollection::new(records)
}

/// Writes records to a `.json` or `.csv` file in the `load_records` schema.
pub fn save_records(collection: &RecordCollection, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    match extension(path) {
        Some("json") => {
            let text = serde_json::to_string_pretty(collection.records()).map_err(|e| {
                Error::InputFormat {
                    path: display,
                    detail: e.to_string(),
                }
            })?;
            std::fs::write(path, text + "\n")?;
        }
        Some("csv") => {
            let mut w = csv::Writer::from_path(path).map_err(|e| Error::InputFormat {
                path: display.clone(),
                detail: e.to_string(),
            })?;
            for r in collection.records() {
                w.serialize(r).map_err(|e| Error::InputFormat {
                    path: display.clone(),
                    detail: e.to_string(),
                })?;
            }
            w.flush()?;
        }
        _ => {
            return Err(Error::InputFormat {
                path: display,
                detail: "unsupported extension (expected .json or .csv)".to_string(),
            })
        }
    }
    Ok(())
}

fn extension(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

fn parse_json(path: &str, text: &str) -> Result<Vec<EvaluationRecord>> {
    serde_json::from_str(text).map_err(|e| Error::InputFormat {
        path: path.to_string(),
        detail: e.to_string(),
    })
}

fn parse_csv(path: &str, text: &str) -> Result<Vec<EvaluationRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: EvaluationRecord = row.map_err(|e| Error::InputFormat {
            path: path.to_string(),
            detail: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// The bundled MEGA benchmark scores: 1,364 records over 13 models,
/// 53 languages, and 15 dataset-metric tasks.
pub fn mega_fixture() -> RecordCollection {
    static DATA: &str = include_str!("../data/mega_records.json");
    let records: Vec<EvaluationRecord> =
        serde_json::from_str(DATA).expect("bundled fixture parses");
    RecordCollection::new(records).expect("bundled fixture is valid")
}
