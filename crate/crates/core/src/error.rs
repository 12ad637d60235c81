use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A record in an input source could not be parsed.
    Malformed { line: usize, reason: String },
    UnknownEntity(String),
    UnknownRelation(String),
    /// The same entity id was declared with two different canonical names.
    ConflictingEntity { id: String, first: String, second: String },
    /// An operation was asked of a graph too small to define it.
    DegenerateGraph(&'static str),
    ShapeMismatch { expected: String, found: String },
    /// A numeric argument fell outside its admissible range.
    InvalidArgument(String),
    EmptyInput(&'static str),
    /// A non-finite value appeared during optimization.
    NonFinite(String),
    /// A model or table was used with parameters of another family or variant.
    Mismatch(String),
    TooManyInvalid { dropped: usize, total: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Malformed { line, reason } => write!(f, "malformed record at line {line}: {reason}"),
            Error::UnknownEntity(id) => write!(f, "unknown entity id `{id}`"),
            Error::UnknownRelation(id) => write!(f, "unknown relation id `{id}`"),
            Error::ConflictingEntity { id, first, second } => write!(
                f,
                "entity `{id}` declared with conflicting canonical names `{first}` and `{second}`"
            ),
            Error::DegenerateGraph(why) => write!(f, "degenerate graph: {why}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::InvalidArgument(why) => write!(f, "invalid argument: {why}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value: {what}"),
            Error::Mismatch(what) => write!(f, "mismatch: {what}"),
            Error::TooManyInvalid { dropped, total } => write!(
                f,
                "{dropped} of {total} examples invalid; check that the dataset matches the graph"
            ),
        }
    }
}

impl core::error::Error for Error {}
