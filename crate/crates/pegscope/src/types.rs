//! Domain value types shared across the crate.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uppercase-normalized stablecoin symbol. The registry of known assets is
/// keyed by lowercase symbol and maps to the remote data-source identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(String);

/// (lowercase symbol, remote history id) pairs. Extending coverage to a new
/// stablecoin means adding a row here.
const ASSET_REGISTRY: &[(&str, &str)] = &[("usdt", "tether"), ("usdc", "usd-coin")];

impl AssetId {
    pub fn new(symbol: &str) -> Result<Self> {
        let trimmed = symbol.trim();
        if trimmed.is_empty() {
            return Err(Error::domain("asset symbol must be non-empty"));
        }
        let lower = trimmed.to_ascii_lowercase();
        if !ASSET_REGISTRY.iter().any(|(sym, _)| *sym == lower) {
            return Err(Error::domain(format!("unknown asset symbol `{trimmed}`")));
        }
        Ok(AssetId(trimmed.to_ascii_uppercase()))
    }

    pub fn usdt() -> Self {
        AssetId("USDT".to_string())
    }

    pub fn usdc() -> Self {
        AssetId("USDC".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Identifier used by the remote market-history endpoint.
    pub fn remote_id(&self) -> &'static str {
        let lower = self.0.to_ascii_lowercase();
        ASSET_REGISTRY
            .iter()
            .find(|(sym, _)| *sym == lower)
            .map(|(_, id)| *id)
            .expect("constructed AssetId is always registered")
    }
}

impl std::fmt::Display for AssetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parse a date in either ISO `YYYY-MM-DD` or `DD/MM/YYYY` form.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .map_err(|_| Error::domain(format!("invalid date `{s}` (expected YYYY-MM-DD or DD/MM/YYYY)")))
}

/// One UTC day of observed market state for one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub asset: AssetId,
    pub date: NaiveDate,
    pub price_usd: f64,
    pub mcap_usd: f64,
    pub volume_daily: f64,
    pub volatility_daily: f64,
}

impl MarketSnapshot {
    pub fn new(
        asset: AssetId,
        date: NaiveDate,
        price_usd: f64,
        mcap_usd: f64,
        volume_daily: f64,
        volatility_daily: f64,
    ) -> Result<Self> {
        if !(price_usd > 0.0) {
            return Err(Error::domain(format!(
                "price_usd must be > 0 for ({asset}, {date}), got {price_usd}"
            )));
        }
        if mcap_usd < 0.0 || volume_daily < 0.0 || volatility_daily < 0.0 {
            return Err(Error::domain(format!(
                "mcap_usd, volume_daily, volatility_daily must be >= 0 for ({asset}, {date})"
            )));
        }
        Ok(MarketSnapshot {
            asset,
            date,
            price_usd,
            mcap_usd,
            volume_daily,
            volatility_daily,
        })
    }
}

/// Indicators derived from a single market snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketDerived {
    pub turnover_ratio: f64,
    pub peg_deviation_pct: f64,
}

/// Reserve and liability figures attested by the issuer. Present only when
/// the source document was machine-extractable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReserveFigures {
    pub circulation_rep: f64,
    pub asset_value: f64,
    pub liability_value: f64,
}

impl ReserveFigures {
    pub fn new(circulation_rep: f64, asset_value: f64, liability_value: f64) -> Result<Self> {
        if !(circulation_rep > 0.0) {
            return Err(Error::domain("circulation_rep must be > 0"));
        }
        if asset_value < 0.0 {
            return Err(Error::domain("asset_value must be >= 0"));
        }
        if !(liability_value > 0.0) {
            return Err(Error::domain("liability_value must be > 0"));
        }
        // 1% tolerance covers rounding in reported figures.
        if circulation_rep > liability_value * 1.01 {
            return Err(Error::domain(format!(
                "circulation_rep {circulation_rep} materially exceeds liability_value {liability_value}"
            )));
        }
        Ok(ReserveFigures {
            circulation_rep,
            asset_value,
            liability_value,
        })
    }
}

/// Structured content of one attestation, plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosureExtract {
    pub asset: AssetId,
    pub report_date: NaiveDate,
    /// `None` exactly when `extractable` is false.
    pub figures: Option<ReserveFigures>,
    pub auditor: Option<String>,
    pub extractable: bool,
    pub source_id: String,
}

impl DisclosureExtract {
    pub fn new(
        asset: AssetId,
        report_date: NaiveDate,
        figures: Option<ReserveFigures>,
        auditor: Option<String>,
        source_id: String,
    ) -> Result<Self> {
        Ok(DisclosureExtract {
            asset,
            report_date,
            extractable: figures.is_some(),
            figures,
            auditor,
            source_id,
        })
    }
}

/// Cross-modal indicators joining one attestation with the report-day snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    pub coverage_ratio: f64,
    pub implied_mcap: f64,
    pub circulation_obs: f64,
    pub supply_gap_pct: f64,
}

/// Aggregates over a date window centered on an attestation report date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAggregate {
    pub asset: AssetId,
    pub center_date: NaiveDate,
    pub span_days: i64,
    pub mean_price: f64,
    pub max_abs_peg_dev_pct: f64,
    pub mean_turnover: f64,
    pub mcap_change: f64,
    pub days_present: usize,
}

/// Kind of media an issuer disclosure arrived in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Text,
    Structured,
    ImageOnly,
}

/// A raw issuer disclosure before extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosureDocument {
    pub source_id: String,
    pub asset: AssetId,
    pub report_date: NaiveDate,
    pub media_kind: MediaKind,
    pub body: Option<String>,
}

impl DisclosureDocument {
    pub fn validate(&self) -> Result<()> {
        if self.media_kind == MediaKind::ImageOnly && self.body.is_some() {
            return Err(Error::domain(format!(
                "image-only document {} must not carry a text body",
                self.source_id
            )));
        }
        Ok(())
    }
}

/// One news / media item in the textual corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub url: String,
    pub published_date: NaiveDate,
    pub asset_tags: Vec<AssetId>,
    pub headline: String,
    pub body_text: String,
}

/// Canonicalize a URL: lowercase scheme and host, drop the fragment.
pub fn canonicalize_url(raw: &str) -> Result<String> {
    let mut parsed = url::Url::parse(raw)
        .map_err(|e| Error::domain(format!("invalid url `{raw}`: {e}")))?;
    parsed.set_fragment(None);
    // url already lowercases scheme and host during parsing.
    Ok(parsed.to_string())
}
