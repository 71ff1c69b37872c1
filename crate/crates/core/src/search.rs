//! Controlled search context and result-page evaluation.
//!
//! Queries execute under a fixed account, with the search location
//! overridden to the target shop's coordinates and a wall-clock window
//! that keeps runs inside normal opening times. Whether the target was
//! recalled is evaluated here; the actual backend call lives in the
//! companion crate.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::shop::{Shop, TimeOfDay};
use crate::text::normalize_for_match;

/// Execution context shared by all queries of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchContext {
    /// One fixed account per run, so user profiling stays constant.
    pub account_id: String,
    /// Overridden to the target shop's exact coordinates.
    pub location: GeoPoint,
    /// Local time of the search, minute resolution.
    pub minute_of_day: u16,
    /// Entries per page.
    pub page_size: u32,
    /// Pages considered part of the recall set.
    pub page_depth: u32,
}

impl SearchContext {
    pub fn exposure_cap(&self) -> usize {
        (self.page_size as usize).saturating_mul(self.page_depth as usize)
    }

    pub fn time_of_day(&self) -> TimeOfDay {
        TimeOfDay { minutes: self.minute_of_day }
    }
}

/// Allowed execution window, start inclusive, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
}

impl TimeWindow {
    /// Parses "HH:MM-HH:MM".
    pub fn parse(s: &str) -> Option<Self> {
        let (a, b) = s.split_once('-')?;
        let start = TimeOfDay::parse(a)?;
        let end = TimeOfDay::parse(b)?;
        (start < end).then_some(Self { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateResult {
    Ok,
    Gated,
}

/// A gated query is skipped and its group marked incomplete; incomplete
/// groups never reach the oracle.
pub fn gate_time(ctx: &SearchContext, window: TimeWindow) -> GateResult {
    let t = ctx.time_of_day();
    if window.start <= t && t < window.end {
        GateResult::Ok
    } else {
        GateResult::Gated
    }
}

/// One ranked entry of a result page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    /// May be empty for backends that expose names only.
    pub shop_id: String,
    pub name: String,
    pub score: f64,
}

/// The recall set returned by a backend for one query, in ranking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResultPage {
    pub entries: Vec<ResultEntry>,
    pub query: String,
}

/// How target membership was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Id,
    NormalizedName,
}

/// True iff the target shop appears in the page. Matching is by id; when
/// the backend exposes no ids at all, the fallback is normalized-name
/// exact match. The mode used is reported alongside the outcome.
pub fn recalled(page: &SearchResultPage, target: &Shop) -> (bool, MatchMode) {
    let any_id = page.entries.iter().any(|e| !e.shop_id.is_empty());
    if any_id {
        (page.entries.iter().any(|e| e.shop_id == target.id), MatchMode::Id)
    } else {
        let want = normalize_for_match(&target.name);
        (
            page.entries.iter().any(|e| normalize_for_match(&e.name) == want),
            MatchMode::NormalizedName,
        )
    }
}
