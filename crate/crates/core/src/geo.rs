//! Coordinates and distance.

use serde::{Deserialize, Serialize};

/// WGS84 position stored canonically as (longitude, latitude) in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn lon_in_range(&self) -> bool {
        (-180.0..=180.0).contains(&self.lon)
    }

    pub fn lat_in_range(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat)
    }
}

const METERS_PER_DEG_LAT: f64 = 110_574.0;
const METERS_PER_DEG_LON_EQUATOR: f64 = 111_320.0;

/// Equirectangular distance in meters. Accurate enough at city scale,
/// which is all the radius filter needs.
pub fn distance_meters(a: GeoPoint, b: GeoPoint) -> f64 {
    let mid_lat = (a.lat + b.lat) * 0.5 * core::f64::consts::PI / 180.0;
    let dx = (a.lon - b.lon) * METERS_PER_DEG_LON_EQUATOR * libm::cos(mid_lat);
    let dy = (a.lat - b.lat) * METERS_PER_DEG_LAT;
    libm::sqrt(dx * dx + dy * dy)
}
