//! Derived market and alignment indicators.
//!
//! All functions here are pure; window aggregation never interpolates over
//! missing days.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::types::{
    AlignmentMetrics, AssetId, MarketDerived, MarketSnapshot, ReserveFigures, WindowAggregate,
};

/// Liquidity ratio of daily volume to market capitalization.
pub fn compute_turnover(volume_daily: f64, mcap_usd: f64) -> Result<f64> {
    if !(mcap_usd > 0.0) {
        return Err(Error::domain(format!(
            "turnover undefined for non-positive mcap_usd {mcap_usd}"
        )));
    }
    if volume_daily < 0.0 {
        return Err(Error::domain(format!("negative volume_daily {volume_daily}")));
    }
    Ok(volume_daily / mcap_usd)
}

/// Turnover for a specific snapshot, naming the (asset, date) on error.
pub fn snapshot_turnover(snap: &MarketSnapshot) -> Result<f64> {
    compute_turnover(snap.volume_daily, snap.mcap_usd).map_err(|_| {
        Error::domain(format!(
            "turnover undefined for ({}, {}): mcap_usd = {}",
            snap.asset, snap.date, snap.mcap_usd
        ))
    })
}

/// Signed percentage distance of price from the one-dollar peg.
pub fn compute_peg_deviation(price_usd: f64) -> Result<f64> {
    if !(price_usd > 0.0) {
        return Err(Error::domain(format!("non-positive price_usd {price_usd}")));
    }
    Ok(100.0 * (price_usd - 1.0))
}

/// Ratio of total reserve assets to total liabilities.
pub fn compute_coverage(asset_value: f64, liability_value: f64) -> Result<f64> {
    if !(liability_value > 0.0) {
        return Err(Error::domain(format!(
            "coverage undefined for non-positive liability_value {liability_value}"
        )));
    }
    Ok(asset_value / liability_value)
}

/// Market capitalization implied by attested supply at the observed price.
pub fn compute_implied_mcap(circulation_rep: f64, price_usd: f64) -> Result<f64> {
    if !(circulation_rep > 0.0) || !(price_usd > 0.0) {
        return Err(Error::domain(format!(
            "implied mcap requires positive inputs, got circulation_rep {circulation_rep}, price_usd {price_usd}"
        )));
    }
    Ok(circulation_rep * price_usd)
}

/// Percentage gap between market-observed circulation (mcap / price) and
/// issuer-reported circulation. Positive when observed exceeds reported.
pub fn compute_supply_gap(mcap_usd: f64, price_usd: f64, circulation_rep: f64) -> Result<f64> {
    if !(price_usd > 0.0) {
        return Err(Error::domain(format!("non-positive price_usd {price_usd}")));
    }
    if !(circulation_rep > 0.0) {
        return Err(Error::domain(format!(
            "non-positive circulation_rep {circulation_rep}"
        )));
    }
    let circulation_obs = mcap_usd / price_usd;
    Ok(100.0 * (circulation_obs - circulation_rep) / circulation_rep)
}

/// Derive turnover and peg deviation from one snapshot.
pub fn derive_market(snap: &MarketSnapshot) -> Result<MarketDerived> {
    Ok(MarketDerived {
        turnover_ratio: snapshot_turnover(snap)?,
        peg_deviation_pct: compute_peg_deviation(snap.price_usd)?,
    })
}

/// Join one attestation's figures with the report-day snapshot.
pub fn compute_alignment(figures: &ReserveFigures, snap: &MarketSnapshot) -> Result<AlignmentMetrics> {
    Ok(AlignmentMetrics {
        coverage_ratio: compute_coverage(figures.asset_value, figures.liability_value)?,
        implied_mcap: compute_implied_mcap(figures.circulation_rep, snap.price_usd)?,
        circulation_obs: snap.mcap_usd / snap.price_usd,
        supply_gap_pct: compute_supply_gap(snap.mcap_usd, snap.price_usd, figures.circulation_rep)?,
    })
}

/// High-low range volatility in percent: `100 * (max - min) / min`.
/// Scale-free, and zero for a constant or single-point day.
pub fn estimate_volatility(intraday_prices: &[f64]) -> Result<f64> {
    if intraday_prices.is_empty() {
        return Err(Error::domain("volatility undefined for empty price sequence"));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &p in intraday_prices {
        if !(p > 0.0) {
            return Err(Error::domain(format!("non-positive intraday price {p}")));
        }
        min = min.min(p);
        max = max.max(p);
    }
    Ok(100.0 * (max - min) / min)
}

/// Aggregate snapshots whose date lies within `center_date ± span_days`.
/// Missing days are tolerated; aggregates cover only the days present.
pub fn aggregate_window(
    snapshots: &[MarketSnapshot],
    asset: &AssetId,
    center_date: NaiveDate,
    span_days: i64,
) -> Result<WindowAggregate> {
    if span_days < 0 {
        return Err(Error::domain(format!("negative span_days {span_days}")));
    }
    let mut in_window: Vec<&MarketSnapshot> = snapshots
        .iter()
        .filter(|s| {
            s.asset == *asset && (s.date - center_date).num_days().abs() <= span_days
        })
        .collect();
    in_window.sort_by_key(|s| s.date);
    in_window.dedup_by_key(|s| s.date);

    if in_window.is_empty() {
        return Err(Error::domain(format!(
            "no {asset} snapshot in window {}..{}",
            center_date - chrono::Duration::days(span_days),
            center_date + chrono::Duration::days(span_days)
        )));
    }

    let n = in_window.len() as f64;
    let mean_price = in_window.iter().map(|s| s.price_usd).sum::<f64>() / n;
    let mut max_abs_peg_dev_pct: f64 = 0.0;
    let mut turnover_sum = 0.0;
    for s in &in_window {
        max_abs_peg_dev_pct = max_abs_peg_dev_pct.max(compute_peg_deviation(s.price_usd)?.abs());
        turnover_sum += snapshot_turnover(s)?;
    }
    let mcap_change = in_window.last().unwrap().mcap_usd - in_window.first().unwrap().mcap_usd;

    Ok(WindowAggregate {
        asset: asset.clone(),
        center_date,
        span_days,
        mean_price,
        max_abs_peg_dev_pct,
        mean_turnover: turnover_sum / n,
        mcap_change,
        days_present: in_window.len(),
    })
}
