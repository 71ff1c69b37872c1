//! Pluggable search backends behind one execution contract.
//!
//! The detector stays black-box: it sends a query plus the controlled
//! context and gets back an ordered result page. The simulator can be
//! driven in-process or over HTTP; both speak the same schema, so runs
//! are comparable across modes.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use recallcheck_core::search::{ResultEntry, SearchContext, SearchResultPage};
use recallcheck_core::shop::{Catalog, TimeOfDay};
use recallcheck_core::sim::{search, SimConfig, SimError, SimIndex};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("search transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("simulator setup failed: {0}")]
    Sim(String),
}

/// A search backend under test.
pub trait SearchBackend {
    fn search(&self, query: &str, ctx: &SearchContext) -> Result<SearchResultPage, BackendError>;
}

/// In-process simulator backend.
pub struct SimBackend {
    index: SimIndex,
    config: SimConfig,
}

impl SimBackend {
    pub fn new(catalog: &Catalog, config: SimConfig) -> Result<Self, BackendError> {
        let index = SimIndex::build(catalog, &config)
            .map_err(|e: SimError| BackendError::Sim(e.to_string()))?;
        Ok(Self { index, config })
    }
}

impl SearchBackend for SimBackend {
    fn search(&self, query: &str, ctx: &SearchContext) -> Result<SearchResultPage, BackendError> {
        Ok(search(query, ctx, &self.index, &self.config))
    }
}

/// Wire request of the HTTP search contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchWireRequest {
    pub query: String,
    pub lon: f64,
    pub lat: f64,
    pub account_id: String,
    /// Local time "HH:MM".
    pub timestamp: String,
    pub page_size: u32,
}

/// Wire response: an ordered entry array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchWireResponse {
    pub entries: Vec<SearchWireEntry>,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchWireEntry {
    #[serde(default)]
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub score: f64,
}

pub fn wire_request(query: &str, ctx: &SearchContext) -> SearchWireRequest {
    let t = TimeOfDay { minutes: ctx.minute_of_day };
    SearchWireRequest {
        query: query.to_string(),
        lon: ctx.location.lon,
        lat: ctx.location.lat,
        account_id: ctx.account_id.clone(),
        timestamp: format!("{:02}:{:02}", t.hours(), t.minute_in_hour()),
        page_size: ctx.page_size,
    }
}

pub fn page_from_wire(wire: SearchWireResponse) -> SearchResultPage {
    SearchResultPage {
        entries: wire
            .entries
            .into_iter()
            .map(|e| ResultEntry { shop_id: e.id, name: e.name, score: e.score })
            .collect(),
        query: wire.query,
    }
}

/// Backend talking to a search endpoint over HTTP (e.g. the simulator's
/// serving mode).
pub struct HttpBackend {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { base_url: base_url.trim_end_matches('/').to_string(), client })
    }
}

impl SearchBackend for HttpBackend {
    fn search(&self, query: &str, ctx: &SearchContext) -> Result<SearchResultPage, BackendError> {
        let request = wire_request(query, ctx);
        let resp = self
            .client
            .post(format!("{}/search", self.base_url))
            .json(&request)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("status {status}")));
        }
        let wire: SearchWireResponse = resp
            .json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        Ok(page_from_wire(wire))
    }
}
