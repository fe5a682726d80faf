use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("unknown {kind} `{name}`{}", suggestion_suffix(.suggestions))]
    UnknownSymbol {
        kind: &'static str,
        name: String,
        suggestions: Vec<String>,
    },

    #[error("pattern parse error at byte {position}: {message}")]
    PatternParse { position: usize, message: String },

    #[error("rule file line {line}: {message}")]
    RuleFormat { line: usize, message: String },

    #[error("unsupported rule file version `{0}`")]
    Version(String),

    #[error("relevance set is empty")]
    EmptyRelevance,

    #[error("target entity is not in the candidate universe")]
    TargetFiltered,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by how the tool
    /// was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidConfig(_))
    }
}
