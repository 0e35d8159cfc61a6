use std::path::PathBuf;

use thiserror::Error;

use crate::model::{ItemId, UserId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: line {line}: rating {value} outside range [{min}, {max}]")]
    RatingOutOfRange {
        path: String,
        line: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{path}: line {line}: duplicate rating for user '{user}' and item '{item}'")]
    DuplicateRating {
        path: String,
        line: usize,
        user: String,
        item: String,
    },

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("empty item set")]
    EmptyItemSet,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("no test ratings")]
    NoTestRatings,

    #[error("user has no genre-tagged profile")]
    NoGenreProfile,

    #[error("undefined lift for zero profile popularity")]
    ZeroProfilePopularity,

    #[error("empty item list for user {0}")]
    EmptyUserList(UserId),

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("unknown item {0}")]
    UnknownItem(ItemId),

    #[error("need at least 3 users with a profile, found {0}")]
    TooFewUsers(usize),

    #[error("zero variance in both samples")]
    ZeroVariance,

    #[error("all recommendation frequencies are zero")]
    NoRecommendations,

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("missing group {0}")]
    MissingGroup(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),
}
