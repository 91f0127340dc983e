use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Stage;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] lakefuse_core::Error),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("{0}")]
    OutOfOrder(String),

    #[error("{0}")]
    BadRequest(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("provider failure: {0}")]
    Provider(String),

    #[error("malformed generated CSV: {0}")]
    MalformedGenerated(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Engine(e) => e.code(),
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::OutOfOrder(_) => "out_of_order",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Config { .. } => "config",
            ServiceError::Provider(_) => "provider_failure",
            ServiceError::MalformedGenerated(_) => "malformed_generated_csv",
            ServiceError::Internal(_) => "internal",
        }
    }

    /// Caller mistakes, as opposed to engine or upstream failures.
    pub fn is_user_error(&self) -> bool {
        match self {
            ServiceError::Engine(e) => e.is_user_error(),
            ServiceError::UnknownSession(_)
            | ServiceError::OutOfOrder(_)
            | ServiceError::BadRequest(_)
            | ServiceError::Config { .. } => true,
            ServiceError::Provider(_) | ServiceError::MalformedGenerated(_) | ServiceError::Internal(_) => false,
        }
    }

    pub fn status(&self) -> StatusCode {
        use lakefuse_core::Error as E;
        match self {
            ServiceError::Engine(E::UnknownTable(_) | E::UnknownName { .. }) => StatusCode::NOT_FOUND,
            ServiceError::Engine(E::RowLimitExceeded { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Engine(e) if e.is_user_error() => StatusCode::BAD_REQUEST,
            ServiceError::Engine(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::OutOfOrder(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) | ServiceError::Config { .. } => StatusCode::BAD_REQUEST,
            ServiceError::Provider(_) | ServiceError::MalformedGenerated(_) => StatusCode::BAD_GATEWAY,
        }
    }

    pub fn at(self, stage: impl Into<Option<Stage>>) -> ApiError {
        ApiError {
            error: self,
            stage: stage.into(),
        }
    }
}

/// Error body shared by the HTTP API and the CLI's stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub stage: Option<Stage>,
}

impl ErrorBody {
    pub fn new(error: &ServiceError, stage: Option<Stage>) -> Self {
        ErrorBody {
            code: error.code().to_string(),
            message: error.to_string(),
            stage,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub error: ServiceError,
    pub stage: Option<Stage>,
}

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError {
            error: e.into(),
            stage: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody::new(&self.error, self.stage);
        (self.error.status(), Json(body)).into_response()
    }
}
