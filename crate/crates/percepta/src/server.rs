//! HTTP/JSON service. Handlers are stateless: every response is a pure
//! function of the request body.

use axum::body::Bytes;
use axum::extract::DefaultBodyLimit;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use percepta_core::io::{encode_image, to_json, ImageKind};
use percepta_core::synth::{generate_dataset, rasterize};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

use crate::wire::{estimate, EstimateRequest, GenerateRequest, RenderRequest, RequestError};

/// Large enough for a base64 PNG of a few megapixels or a large dataset.
const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    schema: u32,
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal() -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "internal error",
        )
    }
}

impl From<RequestError> for ApiError {
    fn from(e: RequestError) -> Self {
        match e {
            RequestError::Invalid(msg) => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_request", msg)
            }
            RequestError::Core(e) => e.into(),
        }
    }
}

impl From<percepta_core::Error> for ApiError {
    fn from(e: percepta_core::Error) -> Self {
        match e {
            percepta_core::Error::Io(io) => {
                eprintln!("percepta: i/o failure while serving a request: {io}");
                Self::internal()
            }
            e if e.is_domain() => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "domain_error",
                e.to_string(),
            ),
            e => Self::new(StatusCode::BAD_REQUEST, "bad_data", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            schema: 1,
            error: ErrorDetail {
                code: self.code,
                message: &self.message,
            },
        };
        (self.status, json_response(&body)).into_response()
    }
}

fn json_response<S: Serialize>(value: &S) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], to_json(value)).into_response()
}

fn parse<D: DeserializeOwned>(body: &Bytes) -> Result<D, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "schema_violation", e.to_string()))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<R: Send + 'static>(
    f: impl FnOnce() -> Result<R, ApiError> + Send + 'static,
) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        eprintln!("percepta: worker task failed: {e}");
        ApiError::internal()
    })?
}

async fn health() -> &'static str {
    "ok"
}

async fn generate(body: Bytes) -> Result<Response, ApiError> {
    let req: GenerateRequest = parse(&body)?;
    let data = blocking(move || Ok(generate_dataset(&req.params, req.seed)?)).await?;
    Ok(json_response(&data))
}

async fn render(body: Bytes) -> Result<Response, ApiError> {
    let req: RenderRequest = parse(&body)?;
    let png = blocking(move || {
        Ok(encode_image(
            &rasterize(&req.dataset, &req.render)?,
            ImageKind::Png,
        )?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn estimate_one(body: Bytes) -> Result<Response, ApiError> {
    let req: EstimateRequest = parse(&body)?;
    let resp = blocking(move || Ok(estimate(&req, false)?)).await?;
    Ok(json_response(&resp))
}

async fn compare(body: Bytes) -> Result<Response, ApiError> {
    let reqs: Vec<EstimateRequest> = parse(&body)?;
    if reqs.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            "compare needs at least one request",
        ));
    }
    let resps = blocking(move || {
        reqs.iter()
            .map(|r| estimate(r, false).map_err(ApiError::from))
            .collect::<Result<Vec<_>, _>>()
    })
    .await?;
    Ok(json_response(&resps))
}

pub fn router() -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/generate", post(generate))
        .route("/api/render", post(render))
        .route("/api/estimate", post(estimate_one))
        .route("/api/compare", post(compare))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}
