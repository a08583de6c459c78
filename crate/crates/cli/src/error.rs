use std::fmt;

/// A failure with its process exit code: 1 for numerical or internal
/// failures, 2 for usage and input errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<tgc::Error> for CliError {
    fn from(e: tgc::Error) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self::internal(e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::from(tgc::Error::Numerical("x".into())).code, 1);
        let staged = tgc::Error::Numerical("x".into()).in_stage("em");
        assert_eq!(CliError::from(staged).code, 1);
        assert_eq!(CliError::from(tgc::Error::NoSamples).code, 2);
    }
}
