use thiserror::Error;

/// Errors raised by graph construction, inference and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry for node `{id}`: {reason}")]
    InvalidGeometry { id: String, reason: String },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("node index {index} out of bounds for graph with {len} nodes")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("graph has {0} nodes; exhaustive enumeration is limited to 20")]
    EnumerationTooLarge(usize),

    #[error("spatial correlation must be non-negative, got {0}")]
    NegativeCorrelation(f64),

    #[error("feature `{0}` is constant and cannot be standardized")]
    ConstantFeature(String),

    #[error("feature `{0}` not found")]
    MissingFeature(String),

    #[error("geohash resolution {0} outside supported range 4..=7")]
    GeohashResolution(u8),

    #[error("no geohash cells remain after applying filter `{0}`")]
    EmptyAfterFilter(&'static str),

    #[error("reports are inconsistent with latent states: node {0} reported but latent state is negative")]
    FalsePositive(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error(
        "pooled density is not integrable: precision budget {precision:.6} \
         (sum of fit precisions {fit_precision:.6} minus {divisions} prior divisions of precision {prior_precision:.6})"
    )]
    NonIntegrablePool {
        precision: f64,
        fit_precision: f64,
        prior_precision: f64,
        divisions: usize,
    },

    #[error("coefficient labels differ across events: {0}")]
    LabelMismatch(String),

    #[error("metric requires both classes after exclusion")]
    OneClass,

    #[error("no observations remain after exclusion")]
    EmptyAfterExclusion,

    #[error("kernel matrix is singular even with jitter {0:e}")]
    SingularKernel(f64),

    #[error("k = {k} exceeds the {eligible} eligible nodes")]
    AllocationTooLarge { k: usize, eligible: usize },

    #[error("zero-variance values for `{0}`")]
    ZeroVariance(String),

    #[error("training threshold {threshold} never reached; maximum reporting fraction was {max_fraction:.4}")]
    ThresholdNotReached { threshold: f64, max_fraction: f64 },

    #[error("empty training set: {0}")]
    EmptyTraining(String),

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry { .. } => "invalid_geometry",
            Error::DuplicateNode(_) => "duplicate_node",
            Error::UnknownNode(_) => "unknown_node",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::IndexOutOfBounds { .. } => "index_out_of_bounds",
            Error::EnumerationTooLarge(_) => "enumeration_too_large",
            Error::NegativeCorrelation(_) => "negative_correlation",
            Error::ConstantFeature(_) => "constant_feature",
            Error::MissingFeature(_) => "missing_feature",
            Error::GeohashResolution(_) => "geohash_resolution",
            Error::EmptyAfterFilter(_) => "empty_after_filter",
            Error::FalsePositive(_) => "false_positive",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DegenerateSamples(_) => "degenerate_samples",
            Error::NonIntegrablePool { .. } => "non_integrable_pool",
            Error::LabelMismatch(_) => "label_mismatch",
            Error::OneClass => "one_class",
            Error::EmptyAfterExclusion => "empty_after_exclusion",
            Error::SingularKernel(_) => "singular_kernel",
            Error::AllocationTooLarge { .. } => "allocation_too_large",
            Error::ZeroVariance(_) => "zero_variance",
            Error::ThresholdNotReached { .. } => "threshold_not_reached",
            Error::EmptyTraining(_) => "empty_training",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}
