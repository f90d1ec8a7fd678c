//! The five typed, stateless data-access tools and their call log.
//!
//! Both the wire server and the agent pipeline go through `ToolRegistry`, so
//! every data access leaves a `ToolCallLog` entry.

use std::sync::Mutex;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical;
use crate::error::Result;
use crate::store::{Namespace, RecordKey, Store};
use crate::types::{canonicalize_url, parse_date, AssetId, MarketSnapshot, NewsItem};

pub const TOOL_MARKET_USDT: &str = "market.usdt_snapshot";
pub const TOOL_MARKET_USDC: &str = "market.usdc_snapshot";
pub const TOOL_NEWS_USDT: &str = "news.usdt_range";
pub const TOOL_NEWS_USDC: &str = "news.usdc_range";
pub const TOOL_NEWS_ARTICLE: &str = "news.article";

/// Number of body characters included in a range-query summary.
const SUMMARY_BODY_CHARS: usize = 400;

/// Schema descriptor for one tool, stable across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub input_schema: Value,
    pub output_schema: Value,
}

/// In-band tool outcome. A tool-level error still succeeds at the protocol
/// level; `is_error` flags it and `content` carries a message object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolResult {
    pub is_error: bool,
    pub content: Value,
}

impl ToolResult {
    fn ok(content: Value) -> Self {
        ToolResult {
            is_error: false,
            content,
        }
    }

    fn err(message: impl Into<String>) -> Self {
        ToolResult {
            is_error: true,
            content: json!({"message": message.into()}),
        }
    }
}

/// Protocol-level failure of a tools/call request (bad tool name or
/// malformed arguments).
#[derive(Debug)]
pub struct InvalidParams(pub String);

/// One audited tool invocation.
#[derive(Debug, Clone, Serialize)]
pub struct ToolCallLogEntry {
    pub seq: u64,
    pub tool: String,
    pub arguments: Value,
    pub result_digest: String,
    /// Metadata only; excluded from any determinism contract.
    pub wall_time: String,
}

/// The five tool descriptors, in stable order (2 market + 3 textual).
pub fn descriptors() -> Vec<ToolDescriptor> {
    let date_arg = json!({
        "type": "object",
        "properties": {"date": {"type": "string", "format": "date"}},
        "required": ["date"]
    });
    let range_arg = json!({
        "type": "object",
        "properties": {
            "start": {"type": "string", "format": "date"},
            "end": {"type": "string", "format": "date"}
        },
        "required": ["start", "end"]
    });
    let snapshot_out = json!({
        "type": "object",
        "properties": {
            "asset": {"type": "string"},
            "date": {"type": "string", "format": "date"},
            "price_usd": {"type": "number"},
            "mcap_usd": {"type": "number"},
            "volume_usd": {"type": "number"},
            "volatility_daily": {"type": "number"}
        },
        "required": ["asset", "date", "price_usd", "mcap_usd", "volume_usd", "volatility_daily"]
    });
    let summaries_out = json!({
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "date": {"type": "string", "format": "date"},
                "headline": {"type": "string"},
                "url": {"type": "string"},
                "summary": {"type": "string"}
            },
            "required": ["date", "headline", "url", "summary"]
        }
    });
    let article_out = json!({
        "type": "object",
        "properties": {
            "url": {"type": "string"},
            "title": {"type": "string"},
            "published_date": {"type": "string", "format": "date"},
            "body_text": {"type": "string"}
        },
        "required": ["url", "title", "published_date", "body_text"]
    });
    vec![
        ToolDescriptor {
            name: TOOL_MARKET_USDT.to_string(),
            description: "Daily USDT market snapshot (price, capitalization, volume) for one UTC day.".to_string(),
            input_schema: date_arg.clone(),
            output_schema: snapshot_out.clone(),
        },
        ToolDescriptor {
            name: TOOL_MARKET_USDC.to_string(),
            description: "Daily USDC market snapshot (price, capitalization, volume) for one UTC day.".to_string(),
            input_schema: date_arg,
            output_schema: snapshot_out,
        },
        ToolDescriptor {
            name: TOOL_NEWS_USDT.to_string(),
            description: "Summaries of USDT-tagged media coverage within a date window.".to_string(),
            input_schema: range_arg.clone(),
            output_schema: summaries_out.clone(),
        },
        ToolDescriptor {
            name: TOOL_NEWS_USDC.to_string(),
            description: "Summaries of USDC-tagged media coverage within a date window.".to_string(),
            input_schema: range_arg,
            output_schema: summaries_out,
        },
        ToolDescriptor {
            name: TOOL_NEWS_ARTICLE.to_string(),
            description: "Full article text retrieved by canonical URL.".to_string(),
            input_schema: json!({
                "type": "object",
                "properties": {"url": {"type": "string"}},
                "required": ["url"]
            }),
            output_schema: article_out,
        },
    ]
}

/// Dispatches tool calls against a read-only store and records every call.
pub struct ToolRegistry<'a> {
    store: &'a Store,
    log: Mutex<Vec<ToolCallLogEntry>>,
}

impl<'a> ToolRegistry<'a> {
    pub fn new(store: &'a Store) -> Self {
        ToolRegistry {
            store,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn log_snapshot(&self) -> Vec<ToolCallLogEntry> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> u64 {
        self.log.lock().unwrap().len() as u64
    }

    /// Sequence number of the most recent call, if any.
    pub fn last_seq(&self) -> Option<u64> {
        self.log.lock().unwrap().last().map(|e| e.seq)
    }

    /// Dispatch one tool call. `Err` means the request itself was invalid
    /// (unknown tool or malformed arguments); domain failures come back as
    /// in-band tool errors.
    pub fn call(&self, name: &str, arguments: &Value) -> std::result::Result<ToolResult, InvalidParams> {
        let result = match name {
            TOOL_MARKET_USDT => self.market_snapshot(&AssetId::usdt(), arguments)?,
            TOOL_MARKET_USDC => self.market_snapshot(&AssetId::usdc(), arguments)?,
            TOOL_NEWS_USDT => self.news_range(&AssetId::usdt(), arguments)?,
            TOOL_NEWS_USDC => self.news_range(&AssetId::usdc(), arguments)?,
            TOOL_NEWS_ARTICLE => self.news_article(arguments)?,
            other => return Err(InvalidParams(format!("unknown tool `{other}`"))),
        };
        let digest = canonical::content_digest(&result)
            .map_err(|e| InvalidParams(format!("unserializable result: {e}")))?;
        let mut log = self.log.lock().unwrap();
        let seq = log.len() as u64 + 1;
        log.push(ToolCallLogEntry {
            seq,
            tool: name.to_string(),
            arguments: arguments.clone(),
            result_digest: digest,
            wall_time: chrono::Utc::now().to_rfc3339(),
        });
        Ok(result)
    }

    fn arg_date(arguments: &Value, field: &str) -> std::result::Result<NaiveDate, InvalidParams> {
        let raw = arguments
            .get(field)
            .and_then(Value::as_str)
            .ok_or_else(|| InvalidParams(format!("missing string argument `{field}`")))?;
        parse_date(raw).map_err(|e| InvalidParams(e.to_string()))
    }

    fn market_snapshot(
        &self,
        asset: &AssetId,
        arguments: &Value,
    ) -> std::result::Result<ToolResult, InvalidParams> {
        let date = Self::arg_date(arguments, "date")?;
        let key = RecordKey::market(asset, date);
        match self.store.get(&key) {
            Ok(value) => {
                let snap: MarketSnapshot = serde_json::from_value(value)
                    .map_err(|e| InvalidParams(format!("corrupt market record: {e}")))?;
                Ok(ToolResult::ok(json!({
                    "asset": snap.asset.as_str(),
                    "date": snap.date.to_string(),
                    "price_usd": snap.price_usd,
                    "mcap_usd": snap.mcap_usd,
                    "volume_usd": snap.volume_daily,
                    "volatility_daily": snap.volatility_daily,
                })))
            }
            Err(_) => Ok(ToolResult::err(format!(
                "snapshot not found for {asset} on {date}"
            ))),
        }
    }

    fn news_range(
        &self,
        asset: &AssetId,
        arguments: &Value,
    ) -> std::result::Result<ToolResult, InvalidParams> {
        let start = Self::arg_date(arguments, "start")?;
        let end = Self::arg_date(arguments, "end")?;
        if start > end {
            return Ok(ToolResult::err(format!(
                "invalid window: start {start} is after end {end}"
            )));
        }
        let values = self
            .store
            .range(Namespace::News, asset, start, end)
            .map_err(|e| InvalidParams(e.to_string()))?;
        let mut summaries = Vec::with_capacity(values.len());
        for value in values {
            let item: NewsItem = serde_json::from_value(value)
                .map_err(|e| InvalidParams(format!("corrupt news record: {e}")))?;
            summaries.push(json!({
                "date": item.published_date.to_string(),
                "headline": item.headline,
                "url": item.url,
                "summary": summarize(&item),
            }));
        }
        Ok(ToolResult::ok(Value::Array(summaries)))
    }

    fn news_article(&self, arguments: &Value) -> std::result::Result<ToolResult, InvalidParams> {
        let raw = arguments
            .get("url")
            .and_then(Value::as_str)
            .ok_or_else(|| InvalidParams("missing string argument `url`".to_string()))?;
        let url = canonicalize_url(raw).map_err(|e| InvalidParams(e.to_string()))?;
        match self.store.get(&RecordKey::news(&url)) {
            Ok(value) => {
                let item: NewsItem = serde_json::from_value(value)
                    .map_err(|e| InvalidParams(format!("corrupt news record: {e}")))?;
                Ok(ToolResult::ok(json!({
                    "url": item.url,
                    "title": item.headline,
                    "published_date": item.published_date.to_string(),
                    "body_text": item.body_text,
                })))
            }
            Err(_) => Ok(ToolResult::err(format!("article not found: {url}"))),
        }
    }
}

/// Range-query summary text: headline plus the first 400 characters of body.
fn summarize(item: &NewsItem) -> String {
    let head: String = item.body_text.chars().take(SUMMARY_BODY_CHARS).collect();
    format!("{} | {}", item.headline, head)
}

/// Persist a call log entry-by-entry check helper for tests.
pub fn descriptors_canonical() -> Result<String> {
    canonical::to_canonical_string(&descriptors())
}
