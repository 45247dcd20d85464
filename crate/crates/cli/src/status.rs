use std::fmt;

/// Process exit status of every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Invalid input: unparseable script, bad evaluation record, checksum mismatch.
    Validation = 1,
    /// The completion backend or a download failed.
    Backend = 2,
    /// Bad configuration, missing credential, unusable paths or flags.
    Config = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// A command failure with the status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: ExitStatus,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait WithStatus<T> {
    fn status(self, status: ExitStatus) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithStatus<T> for Result<T, E> {
    fn status(self, status: ExitStatus) -> CmdResult<T> {
        self.map_err(|e| Failure {
            status,
            error: e.into(),
        })
    }
}

pub fn fail<T>(status: ExitStatus, msg: impl fmt::Display) -> CmdResult<T> {
    Err(Failure {
        status,
        error: anyhow::anyhow!("{msg}"),
    })
}
