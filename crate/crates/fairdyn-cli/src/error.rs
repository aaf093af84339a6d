//! CLI error type with exit-code classes and machine-parsable rendering.

use serde::Serialize;

/// Exit code 1: bad inputs. Exit code 2: a numerical routine failed.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CliError {
    Validation {
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        field: Option<String>,
    },
    Numerical { message: String },
}

impl CliError {
    pub fn validation(message: impl Into<String>, field: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            field: Some(field.into()),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError::Numerical {
            message: message.into(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Validation { message, .. } | CliError::Numerical { message } => {
                message.clone()
            }
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Numerical { .. } => 2,
        }
    }

    /// The JSON object printed to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "exit_code": self.exit_code(),
                "detail": self,
            }
        })
    }
}

impl From<fairdyn::Error> for CliError {
    fn from(e: fairdyn::Error) -> Self {
        if e.is_numerical() {
            CliError::numerical(e.to_string())
        } else {
            CliError::Validation {
                message: e.to_string(),
                field: None,
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation {
            message: e.to_string(),
            field: None,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation {
                message,
                field: Some(field),
            } => write!(f, "invalid {field}: {message}"),
            CliError::Validation { message, .. } => write!(f, "{message}"),
            CliError::Numerical { message } => write!(f, "numerical failure: {message}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::CliError;

    #[test]
    fn exit_codes_follow_error_class() {
        let v = CliError::validation("bad mean", "groups.0.mu");
        assert_eq!(v.exit_code(), 1);
        let n = CliError::numerical("iteration stalled");
        assert_eq!(n.exit_code(), 2);

        // Core errors map by their class.
        let domain: CliError = fairdyn::Error::Domain("x out of range".into()).into();
        assert_eq!(domain.exit_code(), 1);
        let convergence: CliError = fairdyn::Error::Convergence {
            context: "solver",
            detail: "stalled".into(),
        }
        .into();
        assert_eq!(convergence.exit_code(), 2);

        let json = v.to_json();
        assert_eq!(json["error"]["exit_code"], 1);
        assert_eq!(json["error"]["detail"]["field"], "groups.0.mu");
    }
}
