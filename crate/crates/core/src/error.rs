use alloc::string::String;

use thiserror::Error;

use crate::model::Method;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("value {value} outside scale [{min}, {max}]")]
    OutOfScale { value: i32, min: i32, max: i32 },
    #[error("scale range does not match the {0} method")]
    ScaleMismatch(Method),
    #[error("scale has {found} labels, expected {expected}")]
    LabelCount { expected: usize, found: usize },
    #[error("unknown test method `{0}`")]
    UnknownMethod(String),
    #[error("stimulus `{0}` is a control question without an expected answer")]
    MissingExpectedAnswer(String),
    #[error("stimulus `{0}` carries an expected answer but is not a control question")]
    UnexpectedAnswer(String),
    #[error("stimulus `{0}` carries a tolerance but is not a gold question")]
    UnexpectedTolerance(String),
    #[error("CCR rating of `{0}` has no presentation order")]
    MissingOrder(String),
    #[error("rating of `{0}` has a presentation order outside CCR")]
    UnexpectedOrder(String),
    #[error("unknown presentation order `{0}`")]
    BadOrder(String),
    #[error("unknown certificate kind `{0}`")]
    BadCertificateKind(String),
    #[error("malformed condition pattern: {0}")]
    BadPattern(String),
    #[error("condition pattern must have exactly one capture group, found {0}")]
    CaptureGroups(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unsupported configuration version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{found} rating clips cannot fill a block of {block}")]
    InsufficientClips { found: usize, block: usize },
    #[error("{0} pool is empty")]
    EmptyPool(&'static str),
    #[error("duplicate stimulus id `{0}`")]
    DuplicateStimulus(String),
    #[error("processed clip `{0}` has no matching reference")]
    UnmatchedPair(String),
    #[error("reference clip `{0}` is not paired with exactly one processed clip")]
    UnpairedReference(String),
    #[error("input table: {0}")]
    InputRows(String),
    #[error("template `{0}` is missing")]
    MissingTemplate(String),
    #[error("pcm format mismatch between source and message")]
    FormatMismatch,
    #[error("prefix of {prefix} samples is longer than the source ({source_len})")]
    PrefixTooLong { prefix: usize, source_len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("answer batch is missing mandatory columns: {0}")]
    MissingColumns(String),
    #[error("answer batch has no rating columns")]
    NoRatingColumns,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance; correlation undefined")]
    ZeroVariance,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("mapping order must be 1 or 3, got {0}")]
    MappingOrder(usize),
    #[error("matrix is incomplete or ragged")]
    IncompleteMatrix,
    #[error("reference condition `{0}` not present")]
    MissingReference(String),
    #[error("CCR rating of `{0}` has no presentation order")]
    MissingOrder(String),
    #[error("|r| must be < 1 for the Fisher transform, got {0}")]
    UnitCorrelation(f64),
    #[error("significance level must be in (0, 1), got {0}")]
    Alpha(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("at least {needed} runs required, got {got}")]
    TooFewRuns { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("population fractions sum to {0}, expected 1")]
    Fractions(String),
    #[error("invalid archetype: {0}")]
    Archetype(String),
    #[error("latent quality has no score for condition `{0}`")]
    MissingLatent(String),
    #[error("latent score {score} for `{condition}` is outside the scale")]
    LatentOutOfScale { condition: String, score: String },
    #[error("population is empty")]
    EmptyPopulation,
    #[error("no worker can take session `{0}` without rating a clip twice")]
    NoEligibleWorker(String),
    #[error("plan method {plan} does not match the experiment ({config})")]
    MethodMismatch { plan: Method, config: Method },
}
