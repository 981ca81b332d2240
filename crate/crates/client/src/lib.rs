//! Async client for the ledgersql HTTP service.
//!
//! ```no_run
//! # async fn demo() -> Result<(), ledgersql_client::ClientError> {
//! let client = ledgersql_client::Client::new("http://127.0.0.1:8080")?;
//! let question = ledgersql_client::AskRequest::new("How many loans are there?");
//! let response = client.ask("financial", &question).await?;
//! println!("{:?}", response.final_sql);
//! # Ok(())
//! # }
//! ```

pub use ledgersql_proto::{AskRequest, AskResponse, DatabaseInfo, ErrorBody, Health, SessionTrace};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid server url {0:?}")]
    InvalidUrl(String),
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The server answered with a structured error body.
    #[error("{status}: {} ({})", body.error.message, body.error.code)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("{status}: {text}")]
    UnexpectedStatus { status: StatusCode, text: String },
}

impl ClientError {
    /// Machine-readable code of a structured server error.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.error.code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        Self::with_http(base_url, reqwest::Client::new())
    }

    pub fn with_http(base_url: &str, http: reqwest::Client) -> Result<Self, ClientError> {
        let mut base = Url::parse(base_url).map_err(|_| ClientError::InvalidUrl(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::InvalidUrl(base_url.to_string()));
        }
        if !base.path().ends_with('/') {
            base.set_path(&format!("{}/", base.path()));
        }
        Ok(Self { base, http })
    }

    pub fn base_url(&self) -> &Url {
        &self.base
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("base url checked in new").pop_if_empty().extend(segments);
        url
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        decode(self.http.get(self.url(&["healthz"])).send().await?).await
    }

    pub async fn databases(&self) -> Result<Vec<DatabaseInfo>, ClientError> {
        decode(self.http.get(self.url(&["v1", "databases"])).send().await?).await
    }

    pub async fn ask(&self, database_id: &str, request: &AskRequest) -> Result<AskResponse, ClientError> {
        let url = self.url(&["v1", "databases", database_id, "ask"]);
        decode(self.http.post(url).json(request).send().await?).await
    }

    pub async fn trace(&self, trace_id: &str) -> Result<SessionTrace, ClientError> {
        decode(self.http.get(self.url(&["v1", "traces", trace_id])).send().await?).await
    }
}

async fn decode<T: DeserializeOwned>(response: reqwest::Response) -> Result<T, ClientError> {
    let status = response.status();
    if status.is_success() {
        return Ok(response.json().await?);
    }
    let text = response.text().await?;
    match serde_json::from_str::<ErrorBody>(&text) {
        Ok(body) => Err(ClientError::Api { status, body }),
        Err(_) => Err(ClientError::UnexpectedStatus { status, text }),
    }
}
