use crate::model::NodeId;

/// Errors produced by the optimizer and its supporting modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("inconsistent activation state: {0}")]
    InconsistentState(String),

    #[error("numerical failure in LP solver: {0}")]
    NumericalFailure(String),

    #[error("LP solve exceeded its deadline")]
    DeadlineExceeded,

    #[error("no undetermined ReLU left to split")]
    NoUndetermined,

    #[error("{unfixed} unfixed ReLUs exceed the enumeration limit of {limit}")]
    TooLarge { unfixed: usize, limit: usize },

    #[error("node {0} has an infinite bound and cannot be big-M encoded")]
    UnboundedNode(NodeId),

    #[error("input domain is empty")]
    EmptyDomain,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
