//! Deterministic mini search engine over a shop catalog.
//!
//! The simulator exists so missed recalls are constructible and
//! auditable end to end: it segments queries, resolves location phrases,
//! matches tokens over name and type, filters closed and far-away shops,
//! ranks with a simple linear score, and caps exposure. Two injectable
//! fault modes reproduce the known missed-recall root causes: picking the
//! wrong main intent segment, and misreading a shop-name fragment as a
//! landmark.

mod engine;
mod index;

pub use engine::{
    ground_truth_misses, resolve_location_phrase, search, segment, ExpectedMiss,
    LocationResolution, Segmentation,
};
pub use index::SimIndex;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Override which segment is taken as the main search intent.
    SegmentationMainPart,
    /// Treat a shop-name fragment as a geographic constraint even though
    /// it names the shop.
    LandmarkMisparse,
}

/// What a fault applies to: a shop id or a normalized query pattern.
/// Exactly one selector must be set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FaultSelector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shop_id: Option<String>,
    /// Matches queries whose match-normalized text equals this pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub selector: FaultSelector,
    /// For `SegmentationMainPart`: the token to force as main part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_part: Option<String>,
    /// For `LandmarkMisparse`: the landmark phrase to force. When absent,
    /// any dictionary phrase in a matching query is misparsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phrase: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    /// A fault selector matched nothing in the catalog at injection time.
    FaultSelectorUnmatched(String),
    /// A selector must set exactly one of shop_id / query_pattern.
    InvalidSelector,
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::FaultSelectorUnmatched(s) => {
                write!(f, "fault selector `{s}` matches no catalog element")
            }
            SimError::InvalidSelector => {
                write!(f, "fault selector must set exactly one of shop_id / query_pattern")
            }
        }
    }
}

/// Simulator configuration, including fault injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Exposure cap: shops shown per page.
    pub page_cap: usize,
    /// Shops farther than this from the effective search location are
    /// filtered out.
    pub radius_meters: f64,
    pub token_weight: f64,
    pub distance_weight: f64,
    /// Reserved for randomized fixture construction; search itself is
    /// deterministic and never draws from it.
    #[serde(default)]
    pub rng_seed: u64,
    /// Landmark phrase (match-normalized) -> coordinates.
    #[serde(default)]
    pub landmarks: BTreeMap<String, GeoPoint>,
    /// Per-shop static score offset standing in for promotions and other
    /// opaque ordering strategies.
    #[serde(default)]
    pub static_boosts: BTreeMap<String, f64>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            page_cap: 20,
            radius_meters: 3000.0,
            token_weight: 1.0,
            distance_weight: 0.1,
            rng_seed: 0,
            landmarks: BTreeMap::new(),
            static_boosts: BTreeMap::new(),
            faults: Vec::new(),
        }
    }
}

impl SimConfig {
    /// The same configuration with all faults removed; used by the
    /// white-box ground-truth pass.
    pub fn without_faults(&self) -> Self {
        let mut c = self.clone();
        c.faults.clear();
        c
    }
}
