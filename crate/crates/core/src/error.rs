use thiserror::Error;

/// Errors raised by constructors, planners and estimators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} and {1} are not co-prime")]
    NotCoprime(i64, i64),

    /// The zero-sum triple system has no integer solution for these rates.
    #[error("no zero-sum solution for rates {0:?}: gcd of the differences is {1}")]
    NoZeroSumSolution([i64; 3], i64),

    /// Enumeration would exceed the configured work or memory budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    /// The moment sequence carries no signal energy.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "Domain",
            Error::NotCoprime(..) => "NotCoprime",
            Error::NoZeroSumSolution(..) => "NoZeroSumSolution",
            Error::ResourceLimit(_) => "ResourceLimit",
            Error::Overflow(_) => "Overflow",
            Error::DegenerateModel(_) => "DegenerateModel",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
