//! Typed client for the harness service. One method per route; error
//! bodies from the service surface as [`ClientError::Api`].

use serde::de::DeserializeOwned;
use serde::Serialize;
use waypoint_core::api::{
    CitySearchRequest, EpisodeRequest, EpisodeResponse, ErrorBody, EvaluateRequest,
    EvaluateResponse, FlightSearchRequest, HealthResponse, ReportRequest, ReportResponse,
    ToolResponse, EPISODES_PATH, EVALUATE_PATH, HEALTH_PATH, REPORT_PATH, TOOLS_PREFIX,
};
use waypoint_core::tools::{
    ATTRACTION_SEARCH, FLIGHT_SEARCH, HOTEL_SEARCH, RESTAURANT_SEARCH,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with a non-2xx status.
    #[error("service returned {status}: {message}")]
    Api { status: u16, message: String },
}

#[derive(Debug, Clone)]
pub struct ServiceClient {
    base: String,
    http: reqwest::Client,
}

impl ServiceClient {
    pub fn new(base_url: &str) -> Self {
        ServiceClient {
            base: base_url.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        let response = self.http.get(format!("{}{HEALTH_PATH}", self.base)).send().await?;
        decode(response).await
    }

    pub async fn run_episode(
        &self,
        request: &EpisodeRequest,
    ) -> Result<EpisodeResponse, ClientError> {
        self.post(EPISODES_PATH, request).await
    }

    pub async fn evaluate(
        &self,
        request: &EvaluateRequest,
    ) -> Result<EvaluateResponse, ClientError> {
        self.post(EVALUATE_PATH, request).await
    }

    pub async fn report(&self, request: &ReportRequest) -> Result<ReportResponse, ClientError> {
        self.post(REPORT_PATH, request).await
    }

    pub async fn flight_search(
        &self,
        request: &FlightSearchRequest,
    ) -> Result<ToolResponse, ClientError> {
        self.post(&format!("{TOOLS_PREFIX}/{FLIGHT_SEARCH}"), request).await
    }

    pub async fn hotel_search(&self, city: &str) -> Result<ToolResponse, ClientError> {
        self.city_search(HOTEL_SEARCH, city).await
    }

    pub async fn restaurant_search(&self, city: &str) -> Result<ToolResponse, ClientError> {
        self.city_search(RESTAURANT_SEARCH, city).await
    }

    pub async fn attraction_search(&self, city: &str) -> Result<ToolResponse, ClientError> {
        self.city_search(ATTRACTION_SEARCH, city).await
    }

    async fn city_search(&self, tool: &str, city: &str) -> Result<ToolResponse, ClientError> {
        let request = CitySearchRequest { city: city.to_string() };
        self.post(&format!("{TOOLS_PREFIX}/{tool}"), &request).await
    }

    async fn post<T: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &T,
    ) -> Result<R, ClientError> {
        let response = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await?;
        decode(response).await
    }
}

async fn decode<R: DeserializeOwned>(response: reqwest::Response) -> Result<R, ClientError> {
    let status = response.status();
    if status.is_success() {
        return Ok(response.json().await?);
    }
    let text = response.text().await.unwrap_or_default();
    // Not every error body is ours (proxies, 404s); fall back to raw text.
    let message = match serde_json::from_str::<ErrorBody>(&text) {
        Ok(body) => body.error,
        Err(_) if text.is_empty() => status.to_string(),
        Err(_) => text,
    };
    Err(ClientError::Api { status: status.as_u16(), message })
}
