use std::fmt;

use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Io,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: Kind::Validation, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { kind: Kind::Io, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 1,
            Kind::Io => 2,
        }
    }

    /// The single JSON line written to stderr.
    pub fn to_json_line(&self) -> String {
        json!({
            "error": match self.kind {
                Kind::Validation => "validation",
                Kind::Io => "io",
            },
            "message": self.message,
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<svls_core::Error> for Failure {
    fn from(e: svls_core::Error) -> Self {
        if e.is_io() {
            Failure::io(e.to_string())
        } else {
            Failure::validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e.to_string())
    }
}
