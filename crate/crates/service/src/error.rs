use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dewat_mca::delphi::DelphiError;
use dewat_mca::pipeline::PipelineError;
use serde_json::{json, Value};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("no {what} with id `{id}`"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }

    pub fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token")
    }

    /// Logs the cause under a fresh incident id; the client only sees the id.
    pub fn internal(cause: impl std::fmt::Display) -> Self {
        let incident = uuid::Uuid::new_v4().to_string();
        tracing::error!(%incident, "{cause}");
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: "internal error".into(),
            details: Some(json!({ "incident": incident })),
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(e)
    }
}

impl From<DelphiError> for ApiError {
    fn from(e: DelphiError) -> Self {
        match e {
            DelphiError::WrongState(_) | DelphiError::IncompleteRound { .. } => {
                ApiError::conflict(e.to_string())
            }
            DelphiError::UnknownExpert(_) => ApiError::unauthorized(),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::ConsistencyGate(failures) => ApiError {
                status: StatusCode::CONFLICT,
                message: e.to_string(),
                details: Some(json!({ "failures": failures })),
            },
            PipelineError::Anova(_) => ApiError::internal(e),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let (Some(Value::Object(extra)), Value::Object(map)) = (self.details, &mut body) {
            map.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}
