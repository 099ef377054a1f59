use thiserror::Error;

pub type Result<T> = std::result::Result<T, RaiError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RaiError {
    #[error("need at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: String, row: usize },
    #[error("ragged input: column {column} has {got} rows, expected {expected}")]
    RaggedInput {
        column: usize,
        got: usize,
        expected: usize,
    },
    #[error("every feature column is constant")]
    AllColumnsConstant,
    #[error("response has zero variance")]
    ConstantResponse,
    #[error("feature {0} is collinear with the current model")]
    CollinearFeature(usize),
    #[error("not enough residual degrees of freedom to test another feature (n = {n}, model size = {size})")]
    InsufficientDf { n: usize, size: usize },
    #[error("selected columns are linearly dependent")]
    SingularSubset,
    #[error("feature index {index} out of range (p = {p})")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("insufficient alpha-wealth: have {wealth:e}, need {alpha:e}")]
    InsufficientWealth { wealth: f64, alpha: f64 },
    #[error("every remaining candidate has a zero t-statistic; no later pass can reject")]
    NoFinitePass,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("interaction {0} is constant on this sample")]
    ConstantInteraction(String),
    #[error("no candidate has a positive adjusted norm")]
    SingularStep,
    #[error("enumeration needs {needed} subsets, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("every candidate subset was singular or uninformative")]
    AllSubsetsSingular,
    #[error("true-model terms are degenerate: {0}")]
    DegenerateTerms(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
