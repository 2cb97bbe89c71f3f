use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;

/// Error response: an HTTP status plus a machine-readable code and message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "busy", "a job is running on this session")
    }

    pub fn no_session(id: u64) -> Self {
        Self::new(StatusCode::NOT_FOUND, "no_session", format!("no session {id}"))
    }

    pub fn not_computed(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_computed", format!("{what} is not computed yet"))
    }
}

/// Stable code for a library error.
pub fn error_code(e: &alseg::Error) -> &'static str {
    use alseg::Error::*;
    match e {
        Io { .. } => "io",
        SizeMismatch { .. } | UnknownDtype(_) | Descriptor(_) => "bad_volume",
        OutOfBounds { .. } => "out_of_bounds",
        InvalidLevel { .. } => "invalid_level",
        Phantom(_) => "bad_phantom",
        FeatureConfig(_) | InvalidEnvironmentSize(_) => "bad_features",
        SingleClass { .. } => "single_class",
        SeedWithoutEnvironment { .. } => "no_environment",
        ConflictingSeed { .. } => "conflicting_seed",
        SeedParse { .. } => "seed_parse",
        InvalidParameter(_) | InvalidGrid(_) | InfeasibleNu { .. } => "invalid_parameter",
        CorruptModel(_) | VersionMismatch(_) => "corrupt_checkpoint",
        Untrained(_) => "untrained",
        _ => "internal",
    }
}

impl From<alseg::Error> for ApiError {
    fn from(e: alseg::Error) -> Self {
        let code = error_code(&e);
        let status = match code {
            "internal" => StatusCode::INTERNAL_SERVER_ERROR,
            "single_class" | "untrained" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = toml::to_string(&ErrorDoc {
            code: self.code,
            message: &self.message,
        })
        .expect("error document serializes");
        (self.status, [(header::CONTENT_TYPE, crate::TOML_TYPE)], body).into_response()
    }
}
