//! Exit-code taxonomy.

use std::fmt;

use doodle_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Runtime = 1,
    /// Bad flags or values, or a missing input file.
    Usage = 2,
    /// Unreadable container or config, or inputs that do not fit together.
    Format = 3,
    Diverged = 4,
}

/// An error paired with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            kind,
            error: error.into(),
        }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(ExitKind::Usage, error)
    }

    pub fn format(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(ExitKind::Format, error)
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(ExitKind::Runtime, error)
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn kind_of(e: &Error) -> ExitKind {
    match e {
        Error::InvalidArgument(_) | Error::EmptyDataset(_) => ExitKind::Usage,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ExitKind::Usage,
        Error::Io { .. } | Error::InvalidState(_) => ExitKind::Runtime,
        Error::Format(_) | Error::ConfigMismatch(_) => ExitKind::Format,
        Error::TrainingDiverged(_) => ExitKind::Diverged,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(kind_of(&e), e)
    }
}

impl From<anyhow::Error> for Failure {
    /// Classified by the first library error in the chain, if any.
    fn from(e: anyhow::Error) -> Self {
        let kind = e
            .chain()
            .find_map(|c| c.downcast_ref::<Error>())
            .map_or(ExitKind::Runtime, kind_of);
        Failure::new(kind, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_codes() {
        let missing = Error::Io {
            path: "x".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(Failure::from(missing).code(), 2);
        assert_eq!(Failure::from(Error::Format("magic".into())).code(), 3);
        assert_eq!(Failure::from(Error::ConfigMismatch("side".into())).code(), 3);
        assert_eq!(Failure::from(Error::TrainingDiverged("nan".into())).code(), 4);
        assert_eq!(Failure::from(anyhow::anyhow!("disk full")).code(), 1);
        let wrapped = anyhow::Error::from(Error::Format("magic".into())).context("loading demos");
        let f = Failure::from(wrapped);
        assert_eq!(f.code(), 3);
        assert!(f.to_string().starts_with("loading demos: "));
    }
}
