//! File loaders: market CSV, attestation record JSON, news JSONL.

pub mod extract;
pub mod remote;

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::{
    canonicalize_url, parse_date, AssetId, DisclosureExtract, MarketSnapshot, NewsItem,
    ReserveFigures,
};

/// Exact header required of a market CSV file.
pub const MARKET_CSV_HEADER: &str = "date,asset,price_usd,mcap_usd,volume_daily,volatility_daily";

/// Load a market CSV file into snapshots sorted by (asset, date).
/// Duplicate (asset, date) rows are rejected.
pub fn load_market_csv(path: impl AsRef<Path>) -> Result<Vec<MarketSnapshot>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path.display().to_string(), "empty file"))?;
    if header.trim_end() != MARKET_CSV_HEADER {
        return Err(Error::parse(
            format!("{}:1", path.display()),
            format!("header must be exactly `{MARKET_CSV_HEADER}`"),
        ));
    }

    let mut snapshots = Vec::new();
    let mut seen: HashSet<(AssetId, chrono::NaiveDate)> = HashSet::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("{}:{}", path.display(), lineno);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(loc, format!("expected 6 fields, got {}", fields.len())));
        }
        let date = parse_date(fields[0]).map_err(|e| Error::parse(&loc, e.to_string()))?;
        let asset = AssetId::new(fields[1]).map_err(|e| Error::parse(&loc, e.to_string()))?;
        let num = |idx: usize, name: &str| -> Result<f64> {
            fields[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(&loc, format!("invalid {name} `{}`", fields[idx])))
        };
        let snap = MarketSnapshot::new(
            asset.clone(),
            date,
            num(2, "price_usd")?,
            num(3, "mcap_usd")?,
            num(4, "volume_daily")?,
            num(5, "volatility_daily")?,
        )
        .map_err(|e| Error::parse(&loc, e.to_string()))?;
        if !seen.insert((asset, date)) {
            return Err(Error::Integrity {
                key: format!("market:{}/{date}", fields[1]),
                existing: "earlier row".into(),
                incoming: format!("duplicate at line {lineno}"),
            });
        }
        snapshots.push(snap);
    }
    snapshots.sort_by(|a, b| (&a.asset, a.date).cmp(&(&b.asset, b.date)));
    Ok(snapshots)
}

/// Serialize snapshots back to the market CSV format (load/re-serialize/load
/// is identity).
pub fn market_csv_string(snapshots: &[MarketSnapshot]) -> String {
    let mut out = String::from(MARKET_CSV_HEADER);
    out.push('\n');
    for s in snapshots {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.date, s.asset, s.price_usd, s.mcap_usd, s.volume_daily, s.volatility_daily
        ));
    }
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttestationRecord {
    asset: String,
    report_date: String,
    circulation_rep: Option<f64>,
    asset_value: Option<f64>,
    liability_value: Option<f64>,
    auditor: Option<String>,
    extractable: bool,
    source_id: String,
}

/// Load a JSON array of attestation records, sorted by (asset, report_date).
pub fn load_attestation_records(path: impl AsRef<Path>) -> Result<Vec<DisclosureExtract>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let raw: Vec<serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let mut records = Vec::with_capacity(raw.len());
    for (idx, value) in raw.into_iter().enumerate() {
        let loc = format!("{} record {idx}", path.display());
        let rec: RawAttestationRecord = serde_json::from_value(value)
            .map_err(|e| Error::parse(&loc, e.to_string()))?;
        let asset = AssetId::new(&rec.asset).map_err(|e| Error::parse(&loc, e.to_string()))?;
        let report_date =
            parse_date(&rec.report_date).map_err(|e| Error::parse(&loc, e.to_string()))?;
        let figures = if rec.extractable {
            let field = |v: Option<f64>, name: &str| -> Result<f64> {
                v.ok_or_else(|| Error::parse(&loc, format!("extractable record missing {name}")))
            };
            Some(
                ReserveFigures::new(
                    field(rec.circulation_rep, "circulation_rep")?,
                    field(rec.asset_value, "asset_value")?,
                    field(rec.liability_value, "liability_value")?,
                )
                .map_err(|e| Error::parse(&loc, e.to_string()))?,
            )
        } else {
            if rec.circulation_rep.is_some()
                || rec.asset_value.is_some()
                || rec.liability_value.is_some()
            {
                return Err(Error::parse(
                    &loc,
                    "non-extractable record must not carry numeric fields",
                ));
            }
            None
        };
        records.push(
            DisclosureExtract::new(asset, report_date, figures, rec.auditor, rec.source_id)
                .map_err(|e| Error::parse(&loc, e.to_string()))?,
        );
    }
    records.sort_by(|a, b| (&a.asset, a.report_date).cmp(&(&b.asset, b.report_date)));
    Ok(records)
}

/// Load a JSON Lines news corpus. URLs are canonicalized and must be unique.
pub fn load_news_jsonl(path: impl AsRef<Path>) -> Result<Vec<NewsItem>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("{}:{}", path.display(), i + 1);
        let mut item: NewsItem =
            serde_json::from_str(line).map_err(|e| Error::parse(&loc, e.to_string()))?;
        item.url = canonicalize_url(&item.url).map_err(|e| Error::parse(&loc, e.to_string()))?;
        if !seen.insert(item.url.clone()) {
            return Err(Error::parse(&loc, format!("duplicate url {}", item.url)));
        }
        items.push(item);
    }
    Ok(items)
}
