//! Catalog file ingestion and emission.
//!
//! CSV header: `id,name,type,city,lon,lat,hours` — `id` and `hours` are
//! optional columns. JSON carries an array of objects with the same
//! field names. Coordinates are stored canonically as (longitude,
//! latitude) and range-validated; out-of-range rows are rejected with a
//! reason, never silently swapped.

use std::io::Read;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use recallcheck_core::geo::GeoPoint;
use recallcheck_core::shop::{
    format_opening_hours, parse_opening_hours, validate_shop, Catalog, Shop, ShopViolation,
};

use crate::config::CatalogFormat;

/// A rejected input row with the reason it was excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based data row number (or array index for JSON).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum CatalogIoError {
    #[error("catalog is not valid UTF-8")]
    Encoding,
    #[error("catalog read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog has duplicate shop id `{0}`")]
    DuplicateId(String),
    #[error("catalog JSON is malformed: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("catalog CSV is malformed: {0}")]
    MalformedCsv(#[from] csv::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<String>,
    name: String,
    #[serde(rename = "type")]
    shop_type: String,
    city: String,
    lon: f64,
    lat: f64,
    #[serde(default)]
    hours: Option<String>,
    #[serde(default)]
    active: Option<bool>,
}

fn violation_text(v: &ShopViolation) -> &'static str {
    match v {
        ShopViolation::EmptyName => "empty name",
        ShopViolation::EmptyType => "empty type",
        ShopViolation::LongitudeOutOfRange => "longitude out of range",
        ShopViolation::LatitudeOutOfRange => "latitude out of range",
        ShopViolation::InvertedOpeningInterval { .. } => "inverted opening interval",
    }
}

fn record_to_shop(record: RawRecord, row: usize) -> Result<Shop, String> {
    let id = match record.id.as_deref().map(str::trim) {
        Some(id) if !id.is_empty() => id.to_string(),
        // synthesized from the data row number when the column is absent
        _ => format!("row-{row}"),
    };
    let mut shop = Shop::new(
        &id,
        &record.name,
        &record.shop_type,
        &record.city,
        GeoPoint { lon: record.lon, lat: record.lat },
    );
    if let Some(hours) = &record.hours {
        shop.opening_hours = parse_opening_hours(hours)?;
    }
    if let Some(active) = record.active {
        shop.active = active;
    }
    let violations = validate_shop(&shop);
    if let Some(first) = violations.first() {
        return Err(violation_text(first).to_string());
    }
    Ok(shop)
}

fn collect(
    records: impl Iterator<Item = Result<RawRecord, String>>,
    source: &str,
) -> Result<(Catalog, Vec<RowError>), CatalogIoError> {
    let mut shops = Vec::new();
    let mut errors = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 1;
        match record.and_then(|r| record_to_shop(r, row)) {
            Ok(shop) => shops.push(shop),
            Err(reason) => errors.push(RowError { row, reason }),
        }
    }
    let catalog = Catalog::new(shops, source)
        .map_err(|e| match e {
            recallcheck_core::shop::CatalogError::DuplicateId(id) => {
                CatalogIoError::DuplicateId(id)
            }
        })?;
    Ok((catalog, errors))
}

/// Parses a catalog byte stream. Schema-violating rows are collected as
/// `RowError`s and parsing continues; undecodable input and duplicate
/// ids are fatal. Count conservation holds: rows in = shops + errors.
pub fn parse_catalog(
    mut input: impl Read,
    format: CatalogFormat,
    source: &str,
) -> Result<(Catalog, Vec<RowError>), CatalogIoError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CatalogIoError::Encoding)?;
    match format {
        CatalogFormat::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            // Header problems are fatal; per-row type errors are row errors.
            reader.headers()?;
            let records: Vec<Result<RawRecord, String>> = reader
                .deserialize::<RawRecord>()
                .map(|r| r.map_err(|e| format!("bad row: {e}")))
                .collect();
            collect(records.into_iter(), source)
        }
        CatalogFormat::Json => {
            let raw: Vec<serde_json::Value> = serde_json::from_str(text)?;
            let records = raw.into_iter().map(|v| {
                serde_json::from_value::<RawRecord>(v).map_err(|e| format!("bad record: {e}"))
            });
            collect(records, source)
        }
    }
}

fn shop_to_record(shop: &Shop) -> RawRecord {
    RawRecord {
        id: Some(shop.id.clone()),
        name: shop.name.clone(),
        shop_type: shop.shop_type.clone(),
        city: shop.city.clone(),
        lon: shop.location.lon,
        lat: shop.location.lat,
        hours: if shop.opening_hours.is_empty() {
            None
        } else {
            Some(format_opening_hours(&shop.opening_hours))
        },
        active: if shop.active { None } else { Some(false) },
    }
}

/// Serializes a catalog; `parse_catalog(emit_catalog(c))` is field-equal
/// to `c`.
pub fn emit_catalog(catalog: &Catalog, format: CatalogFormat) -> Result<String> {
    match format {
        CatalogFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for shop in &catalog.shops {
                writer.serialize(shop_to_record(shop))?;
            }
            let bytes = writer.into_inner().context("flushing catalog CSV")?;
            Ok(String::from_utf8(bytes).context("catalog CSV is UTF-8")?)
        }
        CatalogFormat::Json => {
            let records: Vec<RawRecord> = catalog.shops.iter().map(shop_to_record).collect();
            let mut out = serde_json::to_string_pretty(&records)?;
            out.push('\n');
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,name,type,city,lon,lat,hours,active\n";

    fn parse_csv(body: &str) -> (Catalog, Vec<RowError>) {
        parse_catalog(
            format!("{HEADER}{body}").as_bytes(),
            CatalogFormat::Csv,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn reference_row_parses() {
        let (catalog, errors) =
            parse_csv("s1,Old Flavor Hotpot,Beijing hotpot,Beijing,116.3,40.5,,\n");
        assert!(errors.is_empty());
        let shop = catalog.get("s1").unwrap();
        assert_eq!(shop.name, "Old Flavor Hotpot");
        assert_eq!(shop.shop_type, "Beijing hotpot");
        assert_eq!(shop.location, GeoPoint { lon: 116.3, lat: 40.5 });
        assert!(shop.active);
    }

    #[test]
    fn empty_file_with_header_is_an_empty_catalog() {
        let (catalog, errors) = parse_csv("");
        assert!(catalog.is_empty());
        assert!(errors.is_empty());
    }

    #[test]
    fn out_of_range_latitude_is_a_row_error() {
        let (catalog, errors) = parse_csv(
            "s1,Old Flavor Hotpot,Beijing hotpot,Beijing,116.3,400.5,,\n\
             s2,Chen's hardware,hardware store,Beijing,116.3,40.0,,\n",
        );
        assert_eq!(catalog.len(), 1);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].row, 1);
        assert!(errors[0].reason.contains("latitude"));
    }

    #[test]
    fn count_conservation_holds() {
        let (catalog, errors) = parse_csv(
            "s1,Shop A,bar,Beijing,116.3,40.0,,\n\
             s2,,bar,Beijing,116.3,40.0,,\n\
             s3,Shop C,bar,Beijing,200.5,40.0,,\n",
        );
        assert_eq!(catalog.len() + errors.len(), 3);
    }

    #[test]
    fn missing_id_is_synthesized_from_row_number() {
        let (catalog, _) = parse_csv(",Shop A,bar,Beijing,116.3,40.0,,\n");
        assert!(catalog.get("row-1").is_some());
    }

    #[test]
    fn hours_and_active_columns_round_trip() {
        let (catalog, errors) =
            parse_csv("s1,Shop A,bar,Beijing,116.3,40.0,10:00-21:00,false\n");
        assert!(errors.is_empty());
        let shop = catalog.get("s1").unwrap();
        assert!(!shop.active);
        assert_eq!(shop.opening_hours.len(), 1);

        for format in [CatalogFormat::Csv, CatalogFormat::Json] {
            let emitted = emit_catalog(&catalog, format).unwrap();
            let (back, errs) = parse_catalog(emitted.as_bytes(), format, "test").unwrap();
            assert!(errs.is_empty());
            assert_eq!(back.shops, catalog.shops);
        }
    }

    #[test]
    fn invalid_utf8_is_fatal() {
        let err = parse_catalog(&b"\xff\xfe"[..], CatalogFormat::Csv, "test").unwrap_err();
        assert!(matches!(err, CatalogIoError::Encoding));
    }

    #[test]
    fn duplicate_ids_are_fatal() {
        let input = format!(
            "{HEADER}s1,Shop A,bar,Beijing,116.3,40.0,,\ns1,Shop B,bar,Beijing,116.3,40.0,,\n"
        );
        let err = parse_catalog(input.as_bytes(), CatalogFormat::Csv, "test").unwrap_err();
        assert!(matches!(err, CatalogIoError::DuplicateId(_)));
    }

    #[test]
    fn json_array_parses_like_csv() {
        let json = r#"[{"id":"s1","name":"Old Flavor Hotpot","type":"Beijing hotpot","city":"Beijing","lon":116.3,"lat":40.5}]"#;
        let (catalog, errors) = parse_catalog(json.as_bytes(), CatalogFormat::Json, "test").unwrap();
        assert!(errors.is_empty());
        assert_eq!(catalog.get("s1").unwrap().name, "Old Flavor Hotpot");
    }

    #[test]
    fn determinism_identical_bytes_identical_catalogs() {
        let body = "s1,Shop A,bar,Beijing,116.3,40.0,,\n";
        assert_eq!(parse_csv(body).0, parse_csv(body).0);
    }
}
