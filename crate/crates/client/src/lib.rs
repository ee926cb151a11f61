//! Typed client for the thoughtrag HTTP API.
//!
//! Calls have no read timeout by default; evaluation and
//! preference-construction runs are long by nature. Connection
//! establishment still times out quickly.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use thoughtrag_api as api;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{category}: {message}")]
    Api {
        status: u16,
        category: String,
        message: String,
    },
    #[error("could not decode response: {0}")]
    Decode(String),
}

impl ClientError {
    /// Stable machine-parseable category for exit reporting.
    pub fn category(&self) -> &str {
        match self {
            ClientError::Transport(_) => "transport",
            ClientError::Api { category, .. } => category,
            ClientError::Decode(_) => "decode",
        }
    }
}

pub struct Client {
    base_url: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Result<Self, ClientError> {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .build()?;
        Ok(Self {
            base_url: base_url.into(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }

    async fn decode<T: DeserializeOwned>(response: reqwest::Response) -> Result<T, ClientError> {
        let status = response.status();
        let body = response.text().await?;
        if status.is_success() {
            return serde_json::from_str(&body).map_err(|e| ClientError::Decode(e.to_string()));
        }
        match serde_json::from_str::<api::ErrorBody>(&body) {
            Ok(error) => Err(ClientError::Api {
                status: status.as_u16(),
                category: error.category,
                message: error.message,
            }),
            Err(_) => Err(ClientError::Api {
                status: status.as_u16(),
                category: "http".into(),
                message: body.chars().take(200).collect(),
            }),
        }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        let response = self.http.post(self.url(path)).json(body).send().await?;
        Self::decode(response).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let response = self.http.get(self.url(path)).send().await?;
        Self::decode(response).await
    }

    pub async fn health(&self) -> Result<api::HealthResponse, ClientError> {
        self.get(api::paths::HEALTH).await
    }

    pub async fn build_index(
        &self,
        request: &api::BuildIndexRequest,
    ) -> Result<api::BuildIndexResponse, ClientError> {
        self.post(api::paths::INDEX_BUILD, request).await
    }

    pub async fn load_index(
        &self,
        request: &api::LoadIndexRequest,
    ) -> Result<api::BuildIndexResponse, ClientError> {
        self.post(api::paths::INDEX_LOAD, request).await
    }

    pub async fn list_indexes(&self) -> Result<api::ListIndexesResponse, ClientError> {
        self.get(api::paths::INDEX_LIST).await
    }

    pub async fn retrieve(
        &self,
        request: &api::RetrieveRequest,
    ) -> Result<api::RetrieveResponse, ClientError> {
        self.post(api::paths::RETRIEVE, request).await
    }

    pub async fn ask(&self, request: &api::AskRequest) -> Result<api::AskResponse, ClientError> {
        self.post(api::paths::ASK, request).await
    }

    pub async fn build_prefs(
        &self,
        request: &api::BuildPrefsRequest,
    ) -> Result<api::BuildPrefsResponse, ClientError> {
        self.post(api::paths::PREFS_BUILD, request).await
    }

    pub async fn dpo_check(
        &self,
        request: &api::DpoCheckRequest,
    ) -> Result<api::DpoCheckResponse, ClientError> {
        self.post(api::paths::DPO_CHECK, request).await
    }

    pub async fn eval(&self, request: &api::EvalRequest) -> Result<api::EvalResponse, ClientError> {
        self.post(api::paths::EVAL, request).await
    }
}
