use thiserror::Error;

/// Errors raised while ingesting or validating data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml error: {0}")]
    Toml(String),
}

/// Errors from the survival estimators.
#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("log-rank score undefined for record {index} ('{subject}'): {reason}")]
    UndefinedScore {
        index: usize,
        subject: String,
        reason: String,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Errors from fitting or applying a tree.
#[derive(Debug, Error)]
pub enum TreeError {
    #[error("invalid controls: {0}")]
    Controls(String),
    #[error("cannot fit: {0}")]
    Data(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("cannot route row: covariate '{covariate}' has level '{level}' unseen at a split")]
    Routing { covariate: String, level: String },
    #[error("cross-validation failed: {0}")]
    CrossValidation(String),
}

/// Errors from the evaluation metrics.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Errors from the data generators and experiment drivers.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("root finder did not converge for {0}")]
    RootFinding(String),
    #[error("censoring calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}
