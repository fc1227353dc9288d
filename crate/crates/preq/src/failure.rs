//! Failure classification for exit codes: bad inputs are the caller's
//! problem (exit 1), everything that goes wrong while executing a valid
//! request is a runtime failure (exit 2).

use std::fmt;

use prequential::Error;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure::Validation(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure::Runtime(message.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Parse { .. }
            | Error::InvalidData(_)
            | Error::InvalidParameter(_)
            | Error::InsufficientData(_)
            | Error::InfiniteMean { .. }
            | Error::Misaligned(_)
            | Error::Unsupported(_) => Failure::Validation(err.to_string()),
            Error::Model(_) | Error::NotReproducible(_) | Error::Io(_) => {
                Failure::Runtime(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Runtime(err.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Failure::Runtime(format!("serializing output: {err}"))
    }
}
