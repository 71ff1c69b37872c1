//! Shop and catalog data model.
//!
//! A [`Shop`] is the test target: the entity a group of generated queries
//! is expected to recall. Catalog files carry one shop per record with
//! name, type, city, and coordinates; opening hours are an optional
//! extension used by the simulator's operating-status filter.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::text::normalize_field;

/// Minute-resolution local time of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeOfDay {
    /// Minutes since local midnight, 0..1440.
    pub minutes: u16,
}

impl TimeOfDay {
    pub fn new(hours: u16, minutes: u16) -> Option<Self> {
        if hours < 24 && minutes < 60 {
            Some(Self { minutes: hours * 60 + minutes })
        } else {
            None
        }
    }

    /// Parses "HH:MM".
    pub fn parse(s: &str) -> Option<Self> {
        let (h, m) = s.trim().split_once(':')?;
        Self::new(h.parse().ok()?, m.parse().ok()?)
    }

    pub fn hours(&self) -> u16 {
        self.minutes / 60
    }

    pub fn minute_in_hour(&self) -> u16 {
        self.minutes % 60
    }
}

/// A daily opening interval, open inclusive, close exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningInterval {
    pub open: TimeOfDay,
    pub close: TimeOfDay,
}

impl OpeningInterval {
    pub fn contains(&self, t: TimeOfDay) -> bool {
        self.open <= t && t < self.close
    }
}

/// Parses an hours column of the form "HH:MM-HH:MM[;HH:MM-HH:MM...]".
/// An empty string means always open (no intervals).
pub fn parse_opening_hours(s: &str) -> Result<Vec<OpeningInterval>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for part in s.split(';') {
        let part = part.trim();
        let (open, close) = part
            .split_once('-')
            .ok_or_else(|| alloc::format!("bad hours interval `{part}`"))?;
        let open = TimeOfDay::parse(open)
            .ok_or_else(|| alloc::format!("bad open time `{open}`"))?;
        let close = TimeOfDay::parse(close)
            .ok_or_else(|| alloc::format!("bad close time `{close}`"))?;
        out.push(OpeningInterval { open, close });
    }
    Ok(out)
}

/// Renders opening intervals back to the "HH:MM-HH:MM[;...]" format.
pub fn format_opening_hours(hours: &[OpeningInterval]) -> String {
    let mut out = String::new();
    for (i, iv) in hours.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        out += &alloc::format!(
            "{:02}:{:02}-{:02}:{:02}",
            iv.open.hours(),
            iv.open.minute_in_hour(),
            iv.close.hours(),
            iv.close.minute_in_hour()
        );
    }
    out
}

/// A catalog entry and test target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shop {
    pub id: String,
    pub name: String,
    #[serde(rename = "type")]
    pub shop_type: String,
    pub city: String,
    pub location: GeoPoint,
    /// Empty means always open.
    #[serde(default)]
    pub opening_hours: Vec<OpeningInterval>,
    #[serde(default = "default_true")]
    pub active: bool,
}

fn default_true() -> bool {
    true
}

impl Shop {
    /// Builds a shop with all text fields canonicalized (NFC, trimmed,
    /// whitespace collapsed).
    pub fn new(id: &str, name: &str, shop_type: &str, city: &str, location: GeoPoint) -> Self {
        Self {
            id: id.trim().to_string(),
            name: normalize_field(name),
            shop_type: normalize_field(shop_type),
            city: normalize_field(city),
            location,
            opening_hours: Vec::new(),
            active: true,
        }
    }

    pub fn is_open_at(&self, t: TimeOfDay) -> bool {
        self.opening_hours.is_empty() || self.opening_hours.iter().any(|iv| iv.contains(t))
    }
}

/// One invariant violation found on a shop. Violations are data, not
/// errors: callers decide whether to reject the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShopViolation {
    EmptyName,
    EmptyType,
    LongitudeOutOfRange,
    LatitudeOutOfRange,
    InvertedOpeningInterval { index: usize },
}

/// Returns every invariant violation on the shop; empty means valid.
pub fn validate_shop(shop: &Shop) -> Vec<ShopViolation> {
    let mut v = Vec::new();
    if shop.name.trim().is_empty() {
        v.push(ShopViolation::EmptyName);
    }
    if shop.shop_type.trim().is_empty() {
        v.push(ShopViolation::EmptyType);
    }
    if !shop.location.lon_in_range() {
        v.push(ShopViolation::LongitudeOutOfRange);
    }
    if !shop.location.lat_in_range() {
        v.push(ShopViolation::LatitudeOutOfRange);
    }
    for (index, iv) in shop.opening_hours.iter().enumerate() {
        if iv.open >= iv.close {
            v.push(ShopViolation::InvertedOpeningInterval { index });
        }
    }
    v
}

/// Ordered shop collection; iteration order is the input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub shops: Vec<Shop>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogError {
    DuplicateId(String),
}

impl core::fmt::Display for CatalogError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CatalogError::DuplicateId(id) => write!(f, "duplicate shop id `{id}`"),
        }
    }
}

impl Catalog {
    /// Rejects duplicate ids; order is preserved.
    pub fn new(shops: Vec<Shop>, source: &str) -> Result<Self, CatalogError> {
        let mut seen = alloc::collections::BTreeSet::new();
        for s in &shops {
            if !seen.insert(s.id.clone()) {
                return Err(CatalogError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { shops, source: source.to_string() })
    }

    pub fn get(&self, id: &str) -> Option<&Shop> {
        self.shops.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.shops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shops.is_empty()
    }
}
