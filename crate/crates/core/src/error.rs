use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus is not a monic irreducible polynomial of degree {0}")]
    ReducibleModulus(u32),
    #[error("invalid modulus: {0}")]
    BadModulus(String),
    #[error("field order {q} exceeds the configured cap {cap}")]
    FieldTooLarge { q: u64, cap: u64 },
    #[error("operands belong to different fields")]
    MixedFields,
    #[error("element value {0} is out of range for this field")]
    BadElement(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("no order-2 field automorphism: extension degree {0} is odd")]
    NoInvolution(u32),
    #[error("square roots by Frobenius need characteristic 2, got {0}")]
    NotChar2(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular")]
    Singular,
    #[error("polynomial is not monic")]
    NotMonic,
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("operation needs a form, but the space is of linear kind")]
    NoForm,
    #[error("vector lies in the radical, so no hyperbolic partner exists")]
    RadicalVector,
    #[error("map is not an isometry: {0}")]
    NotIsometric(String),
    #[error("subspace meets the radical")]
    MeetsRadical,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),
    #[error("search exhausted the orbit after {0} states without reaching the target")]
    OrbitExhausted(usize),
    #[error("search state cap of {0} exceeded")]
    FrontierCap(usize),
    #[error("generator index {index} out of range for a set of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("certificate refers to generating set '{found}', expected '{expected}'")]
    GensetMismatch { expected: String, found: String },
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("verification failed at {stage}: {detail}")]
    Verification { stage: String, detail: String },
    #[error("{0}")]
    Parse(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at(self, stage: impl Into<String>) -> Error {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(self.root(), Error::HypothesisFailure(_))
    }
}

