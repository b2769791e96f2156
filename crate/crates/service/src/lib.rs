//! HTTP/JSON API for campaigns whose outcomes come from outside: create a
//! campaign, read its pending suggestion, submit the observed phenotype,
//! inspect hypotheses and metrics.

mod store;

use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gemlab_core::campaign::{Budget, CampaignConfig, Mode};
use gemlab_core::facts::{Cost, Phenotype, Trial};
use gemlab_core::selection::Strategy;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{
    CampaignResource, HypothesisEntry, HypothesisList, HypothesisStatus, InputKind, SkippedLog, Snapshot, Store, StoredInput,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    TrialMismatch(String),
    #[error("{0}")]
    NameTaken(String),
    #[error("{0}")]
    Terminal(String),
    #[error("{0}")]
    UnknownPhenotype(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::TrialMismatch(_) | ServiceError::NameTaken(_) => StatusCode::CONFLICT,
            ServiceError::Terminal(_) => StatusCode::GONE,
            ServiceError::UnknownPhenotype(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidConfig(_) => "invalid_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::TrialMismatch(_) => "trial_mismatch",
            ServiceError::NameTaken(_) => "name_taken",
            ServiceError::Terminal(_) => "campaign_terminal",
            ServiceError::UnknownPhenotype(_) => "unknown_phenotype",
            ServiceError::Internal(_) => "internal",
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(ErrorBody { error: self.code(), message: self.to_string() })).into_response()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    External,
    Oracle,
}

/// A cost given either as a decimal string or a JSON number.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CostValue {
    Text(String),
    Number(f64),
}

impl CostValue {
    fn parse(&self) -> Result<Cost, ServiceError> {
        let text = match self {
            CostValue::Text(s) => s.clone(),
            CostValue::Number(n) => n.to_string(),
        };
        Cost::from_str(&text).map_err(|e| ServiceError::InvalidConfig(format!("budget: {e}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRequest {
    #[serde(default)]
    pub max_cost: Option<CostValue>,
    #[serde(default)]
    pub max_trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateCampaign {
    pub model: String,
    pub environment: String,
    #[serde(default)]
    pub mode: ModeKind,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// Used by the random strategy; ignored by the others.
    #[serde(default)]
    pub seed: Option<u64>,
    /// `codes(g,e)` facts the oracle restores.
    #[serde(default)]
    pub deleted: Vec<String>,
    #[serde(default)]
    pub budget: BudgetRequest,
    #[serde(default)]
    pub enzyme_scope: Option<Vec<String>>,
}

fn default_strategy() -> String {
    "ase".into()
}

impl CreateCampaign {
    pub fn config(&self) -> Result<CampaignConfig, ServiceError> {
        let seed = if self.strategy == "random" { self.seed } else { None };
        let strategy = Strategy::from_parts(&self.strategy, seed).map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let mode = match self.mode {
            ModeKind::External if !self.deleted.is_empty() => {
                return Err(ServiceError::InvalidConfig("`deleted` applies to oracle mode only".into()))
            }
            ModeKind::External => Mode::External,
            ModeKind::Oracle => Mode::Oracle { deleted: self.deleted.clone() },
        };
        let budget = Budget { max_cost: self.budget.max_cost.as_ref().map(CostValue::parse).transpose()?, max_trials: self.budget.max_trials };
        Ok(CampaignConfig { mode, strategy, budget, enzyme_scope: self.enzyme_scope.clone(), design: None, evaluation: None })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitOutcome {
    pub trial: Trial,
    pub phenotype: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadInput {
    pub name: String,
    pub content: String,
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidConfig(format!("malformed request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker task failed: {e}")))?
}

type AppState = State<Arc<Store>>;

async fn create_campaign(State(store): AppState, body: Bytes) -> Result<(StatusCode, Json<CampaignResource>), ServiceError> {
    let request: CreateCampaign = parse_body(&body)?;
    let config = request.config()?;
    let snapshot = blocking(move || store.create(&request.model, &request.environment, &config)).await?;
    Ok((StatusCode::CREATED, Json(snapshot.resource())))
}

async fn list_campaigns(State(store): AppState) -> Json<Vec<CampaignResource>> {
    Json(store.list().iter().map(|s| s.resource()).collect())
}

async fn get_campaign(State(store): AppState, Path(id): Path<String>) -> Result<Json<CampaignResource>, ServiceError> {
    Ok(Json(store.get(&id)?.resource()))
}

async fn submit_outcome(State(store): AppState, Path(id): Path<String>, body: Bytes) -> Result<Json<CampaignResource>, ServiceError> {
    let request: SubmitOutcome = parse_body(&body)?;
    store.get(&id)?;
    let phenotype = Phenotype::from_str(&request.phenotype).map_err(|e| ServiceError::UnknownPhenotype(e.to_string()))?;
    let snapshot = blocking(move || store.submit(&id, &request.trial, phenotype)).await?;
    Ok(Json(snapshot.resource()))
}

async fn list_hypotheses(State(store): AppState, Path(id): Path<String>) -> Result<Json<HypothesisList>, ServiceError> {
    Ok(Json(store.get(&id)?.hypotheses()))
}

async fn get_metrics(State(store): AppState, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let csv = store.get(&id)?.metrics_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn upload(store: Arc<Store>, kind: InputKind, body: Bytes) -> Result<(StatusCode, Json<StoredInput>), ServiceError> {
    let request: UploadInput = parse_body(&body)?;
    let stored = blocking(move || store.put_input(kind, &request.name, &request.content)).await?;
    let status = if stored.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(stored)))
}

async fn upload_model(State(store): AppState, body: Bytes) -> Result<(StatusCode, Json<StoredInput>), ServiceError> {
    upload(store, InputKind::Model, body).await
}

async fn upload_environment(State(store): AppState, body: Bytes) -> Result<(StatusCode, Json<StoredInput>), ServiceError> {
    upload(store, InputKind::Environment, body).await
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign).get(list_campaigns))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/outcome", post(submit_outcome))
        .route("/campaigns/{id}/hypotheses", get(list_hypotheses))
        .route("/campaigns/{id}/metrics", get(get_metrics))
        .route("/models", post(upload_model))
        .route("/environments", post(upload_environment))
        .with_state(store)
}

/// Serves the API on `listener` until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
