//! Core-error to HTTP-error mapping.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thoughtrag_api::ErrorBody;
use thoughtrag_core::bm25::IndexError;
use thoughtrag_core::corpus::CorpusError;
use thoughtrag_core::dpo::DpoError;
use thoughtrag_core::eval::EvalError;
use thoughtrag_core::llm::LlmError;
use thoughtrag_core::mcqa::McqaError;
use thoughtrag_core::pipeline::PipelineError;
use thoughtrag_core::prefs::PrefsError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub category: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, category: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            category,
            message: message.into(),
        }
    }

    pub fn bad_request(category: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, category, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            category: self.category.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<CorpusError> for ApiError {
    fn from(err: CorpusError) -> Self {
        let status = match &err {
            CorpusError::Io(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, "corpus", err.to_string())
    }
}

impl From<IndexError> for ApiError {
    fn from(err: IndexError) -> Self {
        let status = match &err {
            IndexError::Io(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, "index", err.to_string())
    }
}

impl From<McqaError> for ApiError {
    fn from(err: McqaError) -> Self {
        let status = match &err {
            McqaError::Io(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, "dataset", err.to_string())
    }
}

impl From<LlmError> for ApiError {
    fn from(err: LlmError) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "llm", err.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::Llm(inner) => inner.into(),
            PipelineError::InvalidScaleBudget { .. } => {
                Self::bad_request("pipeline", err.to_string())
            }
            other => Self::new(StatusCode::BAD_GATEWAY, "pipeline", other.to_string()),
        }
    }
}

impl From<PrefsError> for ApiError {
    fn from(err: PrefsError) -> Self {
        match err {
            PrefsError::Pipeline(inner) => inner.into(),
            PrefsError::Io(inner) => Self::new(StatusCode::NOT_FOUND, "io", inner.to_string()),
            other => Self::bad_request("prefs", other.to_string()),
        }
    }
}

impl From<DpoError> for ApiError {
    fn from(err: DpoError) -> Self {
        match err {
            DpoError::Io(inner) => Self::new(StatusCode::NOT_FOUND, "io", inner.to_string()),
            other => Self::bad_request("dpo", other.to_string()),
        }
    }
}

impl From<EvalError> for ApiError {
    fn from(err: EvalError) -> Self {
        match err {
            EvalError::Pipeline(inner) => inner.into(),
            EvalError::ItemFailed { .. } => {
                Self::new(StatusCode::BAD_GATEWAY, "eval", err.to_string())
            }
            other => Self::bad_request("eval", other.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(err: std::io::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "io", err.to_string())
    }
}
