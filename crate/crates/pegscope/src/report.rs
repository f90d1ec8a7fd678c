//! Batch analysis tables, event-study reports, and figure series export.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agents::{run_pipeline, ReasoningBackend};
use crate::classify::{peg_stress_severity, Severity, Thresholds};
use crate::error::{Error, Result};
use crate::metrics;
use crate::store::{Namespace, RecordKey, Store};
use crate::tools::ToolRegistry;
use crate::types::{AssetId, DisclosureExtract, MarketSnapshot};

/// Exact column contract of the analyze CSV output.
pub const ANALYZE_CSV_HEADER: &str = "report_date,price_usd,mcap_usd,volume_daily,turnover_ratio,peg_deviation_pct,volatility_daily,circulation_rep,asset_value,liability_value,coverage_ratio,implied_mcap,supply_gap_pct,analysis_outcome";

/// One fully-derived observation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub asset: AssetId,
    pub report_date: NaiveDate,
    pub price_usd: f64,
    pub mcap_usd: f64,
    pub volume_daily: f64,
    pub turnover_ratio: f64,
    pub peg_deviation_pct: f64,
    pub volatility_daily: f64,
    pub circulation_rep: f64,
    pub asset_value: f64,
    pub liability_value: f64,
    pub coverage_ratio: f64,
    pub implied_mcap: f64,
    pub supply_gap_pct: f64,
    pub analysis_outcome: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub asset: AssetId,
    pub report_date: NaiveDate,
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub rows: Vec<ReportRow>,
    pub skipped: Vec<SkippedRow>,
}

/// Run the pipeline over every attestation of the selected asset(s).
/// Per-row failures (e.g. image-only files) land in `skipped`; the batch
/// continues.
pub fn analyze(
    store: &Store,
    asset: Option<&AssetId>,
    backend: &dyn ReasoningBackend,
) -> Result<AnalyzeReport> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (_key, value) in store.scan(Namespace::Attestation)? {
        let extract: DisclosureExtract = serde_json::from_value(value)?;
        if let Some(wanted) = asset {
            if extract.asset != *wanted {
                continue;
            }
        }
        match run_pipeline(store, &extract.asset, extract.report_date, backend) {
            Ok((outcome, _trace)) => {
                let snap_value = store.get(&RecordKey::market(&extract.asset, extract.report_date))?;
                let snap: MarketSnapshot = serde_json::from_value(snap_value)?;
                let figures = extract.figures.as_ref().expect("pipeline rejects non-extractable");
                let derived = metrics::derive_market(&snap)?;
                let alignment = metrics::compute_alignment(figures, &snap)?;
                rows.push(ReportRow {
                    asset: extract.asset.clone(),
                    report_date: extract.report_date,
                    price_usd: snap.price_usd,
                    mcap_usd: snap.mcap_usd,
                    volume_daily: snap.volume_daily,
                    turnover_ratio: derived.turnover_ratio,
                    peg_deviation_pct: derived.peg_deviation_pct,
                    volatility_daily: snap.volatility_daily,
                    circulation_rep: figures.circulation_rep,
                    asset_value: figures.asset_value,
                    liability_value: figures.liability_value,
                    coverage_ratio: alignment.coverage_ratio,
                    implied_mcap: alignment.implied_mcap,
                    supply_gap_pct: alignment.supply_gap_pct,
                    analysis_outcome: outcome.label,
                });
            }
            Err(e) => skipped.push(SkippedRow {
                asset: extract.asset.clone(),
                report_date: extract.report_date,
                source_id: extract.source_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    rows.sort_by(|a, b| (&a.asset, a.report_date).cmp(&(&b.asset, b.report_date)));
    skipped.sort_by(|a, b| (&a.asset, a.report_date).cmp(&(&b.asset, b.report_date)));
    Ok(AnalyzeReport { rows, skipped })
}

/// Render a value in the tables' 4-significant-digit scientific notation,
/// e.g. `9.996E-01` or `-3.550E-02`.
pub fn format_sci(x: f64) -> String {
    if x == 0.0 {
        return "0.000E+00".to_string();
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let a = x.abs();
    let mut exp = a.log10().floor() as i32;
    let mut mantissa = a / 10f64.powi(exp);
    // rounding can push the mantissa to 10.0
    if format!("{mantissa:.3}").starts_with("10") {
        mantissa /= 10.0;
        exp += 1;
    }
    format!("{sign}{mantissa:.3}E{}{:02}", if exp < 0 { "-" } else { "+" }, exp.abs())
}

/// CSV rendering at full precision.
pub fn analyze_csv(report: &AnalyzeReport) -> String {
    let mut out = String::from(ANALYZE_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.report_date,
            r.price_usd,
            r.mcap_usd,
            r.volume_daily,
            r.turnover_ratio,
            r.peg_deviation_pct,
            r.volatility_daily,
            r.circulation_rep,
            r.asset_value,
            r.liability_value,
            r.coverage_ratio,
            r.implied_mcap,
            r.supply_gap_pct,
            r.analysis_outcome.as_str()
        ));
    }
    out
}

/// Aligned-text rendering with 4-significant-digit scientific notation and a
/// trailing skipped section.
pub fn analyze_text(report: &AnalyzeReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:<12} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}  {}\n",
        "asset", "report_date", "price", "mcap", "volume", "turnover", "peg_dev%", "volat",
        "circ_rep", "assets", "liab", "coverage", "implied", "gap%", "outcome"
    ));
    for r in &report.rows {
        out.push_str(&format!(
            "{:<6} {:<12} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}  {}\n",
            r.asset.as_str(),
            r.report_date.to_string(),
            format_sci(r.price_usd),
            format_sci(r.mcap_usd),
            format_sci(r.volume_daily),
            format_sci(r.turnover_ratio),
            format_sci(r.peg_deviation_pct),
            format_sci(r.volatility_daily),
            format_sci(r.circulation_rep),
            format_sci(r.asset_value),
            format_sci(r.liability_value),
            format_sci(r.coverage_ratio),
            format_sci(r.implied_mcap),
            format_sci(r.supply_gap_pct),
            r.analysis_outcome.as_str()
        ));
    }
    out.push_str("\nskipped:\n");
    if report.skipped.is_empty() {
        out.push_str("  (none)\n");
    }
    for s in &report.skipped {
        out.push_str(&format!(
            "  {} {} [{}]: {}\n",
            s.asset.as_str(),
            s.report_date,
            s.source_id,
            s.reason
        ));
    }
    out
}

/// Per-day metrics within an event-study window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub date: NaiveDate,
    pub price_usd: f64,
    pub mcap_usd: f64,
    pub volume_daily: f64,
    pub volatility_daily: f64,
    pub turnover_ratio: f64,
    pub peg_deviation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyReport {
    pub window: crate::types::WindowAggregate,
    pub days: Vec<DayMetrics>,
    pub news: Vec<NewsSummary>,
    /// Worst peg-stress assessment over the window days.
    pub peg_stress_severity: Severity,
    pub peg_stress_magnitude: f64,
    pub min_price: f64,
    pub max_peg_deviation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsSummary {
    pub date: NaiveDate,
    pub headline: String,
    pub url: String,
}

/// Build the window report for `center ± span` days. The center-day snapshot
/// must be present.
pub fn event_study(
    store: &Store,
    asset: &AssetId,
    center: NaiveDate,
    span: i64,
    cfg: &Thresholds,
) -> Result<EventStudyReport> {
    if !store.contains(&RecordKey::market(asset, center)) {
        return Err(Error::SnapshotNotFound {
            asset: asset.to_string(),
            date: center,
        });
    }
    let start = center - chrono::Duration::days(span);
    let end = center + chrono::Duration::days(span);
    let snapshots: Vec<MarketSnapshot> = store
        .range(Namespace::Market, asset, start, end)?
        .into_iter()
        .map(|v| Ok(serde_json::from_value(v)?))
        .collect::<Result<_>>()?;
    let window = metrics::aggregate_window(&snapshots, asset, center, span)?;

    let mut days = Vec::with_capacity(snapshots.len());
    let mut min_price = f64::INFINITY;
    let mut worst_peg = 0.0f64;
    for s in &snapshots {
        let derived = metrics::derive_market(s)?;
        min_price = min_price.min(s.price_usd);
        if derived.peg_deviation_pct.abs() > worst_peg.abs() {
            worst_peg = derived.peg_deviation_pct;
        }
        days.push(DayMetrics {
            date: s.date,
            price_usd: s.price_usd,
            mcap_usd: s.mcap_usd,
            volume_daily: s.volume_daily,
            volatility_daily: s.volatility_daily,
            turnover_ratio: derived.turnover_ratio,
            peg_deviation_pct: derived.peg_deviation_pct,
        });
    }
    let (severity, magnitude) = peg_stress_severity(cfg, worst_peg);

    let registry = ToolRegistry::new(store);
    let tool = match asset.as_str() {
        "USDT" => crate::tools::TOOL_NEWS_USDT,
        _ => crate::tools::TOOL_NEWS_USDC,
    };
    let news_result = registry
        .call(
            tool,
            &serde_json::json!({"start": start.to_string(), "end": end.to_string()}),
        )
        .map_err(|e| Error::domain(e.0))?;
    let mut news = Vec::new();
    if !news_result.is_error {
        for item in news_result.content.as_array().unwrap_or(&Vec::new()) {
            news.push(NewsSummary {
                date: crate::types::parse_date(item["date"].as_str().unwrap_or_default())?,
                headline: item["headline"].as_str().unwrap_or_default().to_string(),
                url: item["url"].as_str().unwrap_or_default().to_string(),
            });
        }
    }

    Ok(EventStudyReport {
        window,
        days,
        news,
        peg_stress_severity: severity,
        peg_stress_magnitude: magnitude,
        min_price,
        max_peg_deviation_pct: worst_peg,
    })
}

pub fn event_study_text(report: &EventStudyReport) -> String {
    let w = &report.window;
    let mut out = format!(
        "event window: {} {} +/- {} days ({} days present)\n\
         mean price {:.6}; max |peg deviation| {:.4}%; mean turnover {:.4}; mcap change {:+.4e}\n\
         peg stress: {} (magnitude {:.4}); window minimum price {:.4}\n\ndays:\n",
        w.asset.as_str(),
        w.center_date,
        w.span_days,
        w.days_present,
        w.mean_price,
        w.max_abs_peg_dev_pct,
        w.mean_turnover,
        w.mcap_change,
        report.peg_stress_severity.as_str(),
        report.peg_stress_magnitude,
        report.min_price
    );
    for d in &report.days {
        out.push_str(&format!(
            "  {}  price {:>9}  mcap {:>10}  volume {:>10}  turnover {:>9}  peg {:>10}%\n",
            d.date,
            format_sci(d.price_usd),
            format_sci(d.mcap_usd),
            format_sci(d.volume_daily),
            format_sci(d.turnover_ratio),
            format_sci(d.peg_deviation_pct)
        ));
    }
    out.push_str("\nnews in window:\n");
    if report.news.is_empty() {
        out.push_str("  (none)\n");
    }
    for n in &report.news {
        out.push_str(&format!("  {}  {}  <{}>\n", n.date, n.headline, n.url));
    }
    out
}

/// Figure series: (file name, value extractor).
const FIGURE_SERIES: &[(&str, fn(&ReportRow) -> f64)] = &[
    ("fig2_market_cap.csv", |r| r.mcap_usd),
    ("fig2_volume.csv", |r| r.volume_daily),
    ("fig3_coverage_ratio.csv", |r| r.coverage_ratio),
    ("fig4_turnover_ratio.csv", |r| r.turnover_ratio),
    ("fig4_peg_deviation.csv", |r| r.peg_deviation_pct),
];

/// Write per-figure CSV series (`report_date,asset,value`) for any plotting
/// tool. Values equal the analyze columns.
pub fn export_figures(report: &AnalyzeReport, out_dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (name, extractor) in FIGURE_SERIES {
        let mut content = String::from("report_date,asset,value\n");
        for row in &report.rows {
            content.push_str(&format!(
                "{},{},{}\n",
                row.report_date,
                row.asset.as_str(),
                extractor(row)
            ));
        }
        std::fs::write(out_dir.join(name), content)?;
        written.push(name.to_string());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format_matches_table_style() {
        assert_eq!(format_sci(0.9996), "9.996E-01");
        assert_eq!(format_sci(8.227e10), "8.227E+10");
        assert_eq!(format_sci(-0.0355), "-3.550E-02");
        assert_eq!(format_sci(0.0), "0.000E+00");
        assert_eq!(format_sci(1.002), "1.002E+00");
        assert_eq!(format_sci(0.9999999), "1.000E+00");
    }
}
