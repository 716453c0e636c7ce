//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced while loading records, fitting the model, or running
/// downstream analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file; `detail` names the offending line or entry.
    #[error("invalid input format in {path}: {detail}")]
    InputFormat { path: String, detail: String },

    /// Two records share the same (model, language, task) key.
    #[error("duplicate record for model '{model}', language '{language}', task '{task}'")]
    DuplicateRecord {
        model: String,
        language: String,
        task: String,
    },

    /// A score failed validation (NaN or infinite).
    #[error("record {index}: non-finite score for model '{model}', language '{language}'")]
    NonFiniteScore {
        index: usize,
        model: String,
        language: String,
    },

    /// A record is missing a required field.
    #[error("record {index}: empty '{field}' field")]
    EmptyField { index: usize, field: String },

    /// The collection holds no records.
    #[error("empty design: no records to encode")]
    EmptyDesign,

    /// The design matrix is rank deficient.
    #[error("singular design: column '{column}' is linearly dependent on earlier columns")]
    SingularDesign { column: String },

    /// Fewer records than fixed-effect columns.
    #[error("underdetermined system: {records} records for {columns} design columns")]
    Underdetermined { records: usize, columns: usize },

    /// The residual variance collapsed; the data are (near) exactly additive.
    #[error("degenerate fit: residual variance {sigma2:.3e} below 1e-12")]
    DegenerateFit { sigma2: f64 },

    /// A language or task absent from the fitted design was requested.
    #[error("unknown {kind} '{value}' not present in the fitted design")]
    UnknownLevel { kind: String, value: String },

    /// PRR is undefined for cells whose potential is not strictly positive.
    #[error("non-positive potential for {} cell(s): {}", cells.len(), cells.join(", "))]
    NonPositivePotential { cells: Vec<String> },

    /// A model has too few records for a sample standard deviation.
    #[error("model '{model}' has {records} record(s); at least 2 required")]
    InsufficientData { model: String, records: usize },

    /// Sample size outside the supported range of a test.
    #[error("sample size {n} outside supported range [{min}, {max}]")]
    SampleSize { n: usize, min: usize, max: usize },

    /// All observations identical where variation is required.
    #[error("degenerate sample: {detail}")]
    DegenerateSample { detail: String },

    /// A grouped test received too few groups or an undersized group.
    #[error("invalid grouping: {detail}")]
    GroupSize { detail: String },

    /// Generic invalid argument (mismatched lengths, constant input, ...).
    #[error("invalid input: {detail}")]
    InvalidInput { detail: String },

    /// Rank comparison over label sets that do not coincide.
    #[error("label sets differ: {} only in first, {} only in second", only_a.len(), only_b.len())]
    SetMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },

    /// Too few shared languages to correlate two potential tables.
    #[error("only {shared} shared language(s); at least 3 required")]
    InsufficientOverlap { shared: usize },

    /// Out-of-range tuning parameter.
    #[error("invalid parameter: {detail}")]
    InvalidParameter { detail: String },
}

impl Error {
    /// True for errors arising from the numerical fit or derived quantities,
    /// as opposed to input validation. Drives the CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign { .. }
                | Error::Underdetermined { .. }
                | Error::DegenerateFit { .. }
                | Error::NonPositivePotential { .. }
                | Error::DegenerateSample { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
