use std::fmt;

use docslim::Error;

pub const FAILURE: u8 = 1;
pub const BAD_ARGS: u8 = 2;
pub const IO: u8 = 3;
pub const IMAGE_TOO_SMALL: u8 = 4;
pub const MALFORMED_TOKENS: u8 = 5;

/// An error message paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::ImageTooSmall { .. } => IMAGE_TOO_SMALL,
        Error::MalformedTokens(_) | Error::TooFewTokens(_) | Error::ZeroNormToken(_) => MALFORMED_TOKENS,
        Error::Io { .. } | Error::Image { .. } => IO,
        Error::InvalidParam(_)
        | Error::SpecConflict(_)
        | Error::DimTooSmall { .. }
        | Error::ShapeMismatch(_)
        | Error::DegenerateOutput { .. }
        | Error::Json(_) => BAD_ARGS,
        _ => FAILURE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(code_for(&e), e.to_string())
    }
}
