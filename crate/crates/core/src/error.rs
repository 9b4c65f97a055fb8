//! Crate-wide error type and its mapping onto process exit codes.
//!
//! The CLI contract distinguishes usage errors (2), data errors (3), and
//! numerical failures (4); everything in the library funnels into [`Error`]
//! so that mapping lives in exactly one place.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad invocation: unknown flags, invalid combinations, malformed spec values.
    #[error("usage: {0}")]
    Usage(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A manifest line failed to parse or failed validation.
    #[error("{path}:{line}: {msg}")]
    Manifest {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Artifact written by an incompatible crate version.
    #[error("{path}: format version {found}, this build reads {expected}")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// Inputs are well-formed but violate a precondition (empty pool, vocab
    /// mismatch, insufficient population, ...).
    #[error("{0}")]
    Data(String),

    /// The label cannot be emitted in the available frames.
    #[error("label needs {needed} frames but only {have} are available")]
    Infeasible { needed: usize, have: usize },

    /// Training or a numerical routine produced a non-finite value.
    #[error("numerical: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code for this error. Success is 0 and is not represented here.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Manifest { .. } | Error::Version { .. } | Error::Data(_) => 3,
            Error::Infeasible { .. } | Error::Numerical(_) => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_cli_contract() {
        assert_eq!(Error::usage("x").exit_code(), 2);
        assert_eq!(Error::data("x").exit_code(), 3);
        assert_eq!(
            Error::io("/nope", std::io::Error::from(std::io::ErrorKind::NotFound)).exit_code(),
            3
        );
        assert_eq!(Error::numerical("nan").exit_code(), 4);
        assert_eq!(Error::Infeasible { needed: 5, have: 3 }.exit_code(), 4);
    }

    #[test]
    fn messages_carry_context() {
        let e = Error::Manifest {
            path: "corpus/manifest.jsonl".into(),
            line: 17,
            msg: "missing field `label`".into(),
        };
        let s = e.to_string();
        assert!(s.contains("17"), "line number must appear in {s:?}");
        assert!(s.contains("label"), "field must appear in {s:?}");
    }
}
