use thiserror::Error;

use crate::process::Violation;
use crate::term::Symbol;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("cyclic substitution: {0} depends on itself")]
    CyclicSubstitution(Symbol),
    #[error("duplicate binding for {0}")]
    DuplicateBinding(Symbol),
    #[error("{0} is not a variable")]
    NotAVariable(Symbol),
    #[error("rewriting exceeded the step budget of {0}")]
    StepBudgetExceeded(usize),
    #[error("exploration exceeded the state budget of {0}")]
    StateBudgetExceeded(usize),
    #[error("arity mismatch: {symbol} expects {expected} argument(s), got {found}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown function symbol {0}")]
    UnknownFunction(String),
    #[error("invalid rewrite rule: {0}")]
    InvalidRule(String),
    #[error("{0} is not fresh")]
    NotFresh(Symbol),
    #[error("no binder at the given position")]
    NotABinder,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("incorrect process: {}", format_violations(.0))]
    Incorrect(Vec<Violation>),
    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: String, right: String },
    #[error("internal action has no co-action")]
    InternalAction,
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Io(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
