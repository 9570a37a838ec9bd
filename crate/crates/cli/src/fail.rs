//! Process exit codes: 0 success, 2 configuration, 3 assets and IO, 4 numeric failure.

use lumafield::ErrorKind;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn asset(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<lumafield::Error> for Failure {
    fn from(e: lumafield::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Asset => 3,
            ErrorKind::Numeric => 4,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::asset(e.to_string())
    }
}
