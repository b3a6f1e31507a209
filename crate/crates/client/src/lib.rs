//! Typed client for the review API served by `forge-server`.

use forge_core::review::{Action, DecisionRequest, ErrorBody, UnitPage, UnitQuery, UnitView};
use forge_core::tmx::CorpusStats;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use url::Url;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server url {0:?}: {1}")]
    BadUrl(String, url::ParseError),
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The server answered with an error status and this reason.
    #[error("server returned {status}: {message}")]
    Api { status: StatusCode, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status(),
            ClientError::BadUrl(..) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReviewClient {
    base: Url,
    http: reqwest::Client,
}

impl ReviewClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let mut text = base_url.to_string();
        if !text.ends_with('/') {
            text.push('/');
        }
        let base = Url::parse(&text).map_err(|e| ClientError::BadUrl(base_url.into(), e))?;
        Ok(ReviewClient { base, http: reqwest::Client::new() })
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("http base url").pop_if_empty().extend(segments);
        url
    }

    async fn check(resp: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Api { status, message })
    }

    async fn json<T: DeserializeOwned>(req: reqwest::RequestBuilder) -> Result<T, ClientError> {
        Ok(Self::check(req.send().await?).await?.json().await?)
    }

    pub async fn list(&self, query: &UnitQuery) -> Result<UnitPage, ClientError> {
        Self::json(self.http.get(self.url(&["units"])).query(query)).await
    }

    pub async fn get(&self, tu_id: &str) -> Result<UnitView, ClientError> {
        Self::json(self.http.get(self.url(&["units", tu_id]))).await
    }

    pub async fn decide(&self, tu_id: &str, action: Action, actor: &str) -> Result<UnitView, ClientError> {
        let body = DecisionRequest { tu_id: None, action, actor: actor.into(), timestamp: 0 };
        self.submit(tu_id, &body).await
    }

    pub async fn submit(&self, tu_id: &str, body: &DecisionRequest) -> Result<UnitView, ClientError> {
        Self::json(self.http.post(self.url(&["units", tu_id, "decision"])).json(body)).await
    }

    /// The memory with all decisions applied, as TMX text.
    pub async fn export(&self) -> Result<String, ClientError> {
        let resp = Self::check(self.http.get(self.url(&["export"])).send().await?).await?;
        Ok(resp.text().await?)
    }

    pub async fn stats(&self) -> Result<CorpusStats, ClientError> {
        Self::json(self.http.get(self.url(&["stats"]))).await
    }
}
