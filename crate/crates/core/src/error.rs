//! Shared error taxonomy.
//!
//! Every fallible operation in this crate returns [`Error`]. The variants split
//! into three families that callers (notably the CLI) treat differently:
//!
//! * validation failures (`Domain`, `Parse`, `Precondition`, `Degenerate`) —
//!   the input itself is unusable;
//! * honest refusals (`Undecidable`) — the answer exists but could not be
//!   certified within the configured precision budget; raising the budget may
//!   succeed;
//! * structural refusals (`NotApplicable`, `InsufficientLines`,
//!   `ScheduleInfeasible`, `NotFoundAtCap`) — the requested object provably
//!   does not exist in the searched range, or the search was capped.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// A comparison or rounding could not be certified within the precision
    /// budget. This is an *outcome*, not a bug: it is the honest answer for
    /// questions posed about ball values (decimal literals) or for symbolic
    /// quantities whose sign certificate needs more bits than allowed.
    #[error("undecidable at precision budget of {budget_bits} bits: {what}")]
    Undecidable { what: String, budget_bits: u32 },

    /// An argument violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed or out-of-range input (validation error).
    #[error("invalid input: {0}")]
    Domain(String),

    /// A literal could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The configuration collapses (zero vector where a direction is needed,
    /// zero denominator, a slit of height zero, ...).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// The requested quantity is not defined for this input (e.g. a miracle
    /// test on a slit that has no convergent in the required height window).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A nearest-line list was too short to bracket the requested height.
    #[error("insufficient nearest-line data: {0}")]
    InsufficientLines(String),

    /// The requested schedule cannot be satisfied by the given data.
    #[error("schedule infeasible: {0}")]
    ScheduleInfeasible(String),

    /// An object of the requested kind was not found within the search cap.
    #[error("not found within cap: {0}")]
    NotFoundAtCap(String),
}

impl Error {
    pub fn undecidable(what: impl Into<String>, budget_bits: u32) -> Self {
        Error::Undecidable {
            what: what.into(),
            budget_bits,
        }
    }

    /// True for the budget-exhaustion family (CLI exit code 3).
    pub fn is_undecidable(&self) -> bool {
        matches!(self, Error::Undecidable { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
