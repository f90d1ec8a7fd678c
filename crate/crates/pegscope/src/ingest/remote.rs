//! Fixture-first remote market-data client.
//!
//! The client maps the public history-endpoint response shape onto
//! `MarketSnapshot` and persists every fetch in the store, so repeated
//! queries are offline-deterministic. Live network access is disabled by
//! default; a `Transport` implementation supplies the actual I/O.

use chrono::NaiveDate;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::store::{RecordKey, Store};
use crate::types::{AssetId, MarketSnapshot};

/// Performs one HTTP GET and returns the response body.
pub trait Transport {
    fn get(&self, url: &str) -> Result<String>;
}

/// Remote endpoint configuration. Network access must be explicitly enabled.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub enabled: bool,
    pub base_url: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            enabled: false,
            base_url: "https://api.coingecko.com/api/v3".to_string(),
        }
    }
}

/// URL for one historical-day query: `{base}/coins/{id}/history?date=DD-MM-YYYY`.
pub fn history_url(base: &str, asset: &AssetId, date: NaiveDate) -> String {
    format!(
        "{}/coins/{}/history?date={}",
        base.trim_end_matches('/'),
        asset.remote_id(),
        date.format("%d-%m-%Y")
    )
}

/// Fetch one day's snapshot, serving from the store cache when present.
pub fn fetch_remote_snapshot(
    asset: &AssetId,
    date: NaiveDate,
    config: &RemoteConfig,
    transport: &dyn Transport,
    store: &Store,
) -> Result<MarketSnapshot> {
    let key = RecordKey::market(asset, date);
    if store.contains(&key) {
        let value = store.get(&key)?;
        return Ok(serde_json::from_value(value)?);
    }
    if !config.enabled {
        return Err(Error::Config(
            "remote market access is disabled; enable it explicitly to fetch live data".to_string(),
        ));
    }
    let body = transport.get(&history_url(&config.base_url, asset, date))?;
    let value: Value = serde_json::from_str(&body)
        .map_err(|e| Error::Transport(format!("malformed remote response: {e}")))?;
    let snapshot = map_history_response(asset, date, &value)?;
    store.put(&key, &snapshot)?;
    Ok(snapshot)
}

/// Map a history response carrying `market_data.{current_price,market_cap,total_volume}.usd`.
/// The endpoint reports no intraday extremes, so volatility is recorded as 0.
pub fn map_history_response(
    asset: &AssetId,
    date: NaiveDate,
    value: &Value,
) -> Result<MarketSnapshot> {
    let field = |group: &str| -> Result<f64> {
        value
            .pointer(&format!("/market_data/{group}/usd"))
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                Error::NotFound(format!(
                    "remote history for ({asset}, {date}) missing market_data.{group}.usd"
                ))
            })
    };
    MarketSnapshot::new(
        asset.clone(),
        date,
        field("current_price")?,
        field("market_cap")?,
        field("total_volume")?,
        0.0,
    )
}
