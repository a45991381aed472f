use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid edge law: {0}")]
    InvalidLaw(String),
    #[error("growth condition fails: inf Lambda = {lambda_min} at beta = {beta_star}")]
    GrowthConditionFailed { lambda_min: f64, beta_star: f64 },
    #[error("root has no parent edge")]
    RootHasNoParentEdge,
    #[error("level enumeration too large: (d-1)^{level} exceeds {limit} vertices")]
    LevelTooLarge { level: u32, limit: u64 },
    #[error("trajectory records arrived out of order: step {got} after {expected}")]
    OutOfOrderRecord { expected: u64, got: u64 },
    #[error("insufficient regenerations; lengthen run (found {found}, need {need})")]
    InsufficientRegenerations { found: usize, need: usize },
    #[error("too few blocks: {found} < {need}")]
    TooFewBlocks { found: usize, need: usize },
    #[error("estimator requires beta = 0 (got {0})")]
    RequiresBetaZero(f64),
    #[error("estimator requires beta != 0")]
    RequiresNonzeroBeta,
    #[error("step budget exceeded: need {needed} steps, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("depth {depth} out of truncation (max {max})")]
    DepthOutOfRange { depth: u32, max: u32 },
    #[error("sigma2 baseline required: beta grid must include beta = 0")]
    MissingSigma2Baseline,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
