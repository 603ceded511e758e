use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown unit id `{0}`")]
    UnknownUnitId(String),
    #[error("self loop on unit `{0}`")]
    SelfLoop(String),
    #[error("duplicate unit id `{0}`")]
    DuplicateUnitId(String),
    #[error("k = {k} nearest neighbours requested but only {n} units")]
    KTooLarge { k: usize, n: usize },
    #[error("non-finite coordinate at unit {0}")]
    NonFiniteCoordinate(usize),
    #[error("empty unit subset")]
    EmptySubset,
    #[error("index {index} out of range for {len} units")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("spatial parameter {value} outside admissible interval ({lower}, {upper})")]
    SpatialParamOutOfRange { value: f64, lower: f64, upper: f64 },
    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficientDesign { rank: usize, cols: usize },
    #[error("too few units: need at least {needed}, got {got}")]
    TooFewUnits { needed: usize, got: usize },
    #[error("residual variance {0:e} below the 1e-12 floor")]
    MinVariance(f64),
    #[error("negative Hessian of the log-likelihood is not positive definite")]
    SingularHessian,
    #[error("{0}")]
    NotApplicable(String),
    #[error("cluster count {k} exceeds the number of units {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("elbow rule needs at least 3 distinct cluster counts")]
    InsufficientGrid,
    #[error("at least 2 farms required, got {0}")]
    TooFewFarms(u64),
    #[error("total output is zero")]
    ZeroTotalOutput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownUnitId(_) => "UnknownUnitId",
            Error::SelfLoop(_) => "SelfLoop",
            Error::DuplicateUnitId(_) => "DuplicateUnitId",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::NonFiniteCoordinate(_) => "NonFiniteCoordinate",
            Error::EmptySubset => "EmptySubset",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::SpatialParamOutOfRange { .. } => "SpatialParamOutOfRange",
            Error::RankDeficientDesign { .. } => "RankDeficientDesign",
            Error::TooFewUnits { .. } => "TooFewUnits",
            Error::MinVariance(_) => "MinVariance",
            Error::SingularHessian => "SingularHessian",
            Error::NotApplicable(_) => "NotApplicable",
            Error::KExceedsN { .. } => "KExceedsN",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InsufficientGrid => "InsufficientGrid",
            Error::TooFewFarms(_) => "TooFewFarms",
            Error::ZeroTotalOutput => "ZeroTotalOutput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::Dimension(_) => "Dimension",
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonNumericCell { .. } => "NonNumericCell",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "IoFailure",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
