//! Rule-based three-level classifier.
//!
//! Thresholds are frozen in configuration; the rule set evaluates five
//! indicator families on report-day values and uses the surrounding window
//! only for persistence.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::types::{
    AssetId, DisclosureExtract, MarketDerived, MarketSnapshot, ReserveFigures, WindowAggregate,
};

/// Indicator families, in deterministic tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Coverage,
    AttestationQuality,
    SupplyGap,
    LiquidityStress,
    PegStress,
}

impl Indicator {
    pub fn all() -> [Indicator; 5] {
        [
            Indicator::Coverage,
            Indicator::AttestationQuality,
            Indicator::SupplyGap,
            Indicator::LiquidityStress,
            Indicator::PegStress,
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Indicator::Coverage => "coverage",
            Indicator::AttestationQuality => "attestation_quality",
            Indicator::SupplyGap => "supply_gap",
            Indicator::LiquidityStress => "liquidity_stress",
            Indicator::PegStress => "peg_stress",
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Normal,
    Suspicious,
    Abnormal,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Normal => "normal",
            Severity::Suspicious => "suspicious",
            Severity::Abnormal => "abnormal",
        }
    }
}

/// Frozen classifier thresholds. The JSON keys are the configuration-file
/// contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub coverage_abnormal: f64,
    pub gap_suspicious: f64,
    pub gap_abnormal: f64,
    pub turnover_abnormal: f64,
    pub turnover_suspicious: f64,
    pub volatility_suspicious: f64,
    pub peg_suspicious: f64,
    pub peg_abnormal: f64,
    pub staleness_days: i64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            coverage_abnormal: 1.0,
            gap_suspicious: 1.0,
            gap_abnormal: 3.0,
            turnover_abnormal: 0.70,
            turnover_suspicious: 0.50,
            volatility_suspicious: 0.25,
            peg_suspicious: 0.5,
            peg_abnormal: 2.0,
            staleness_days: 120,
        }
    }
}

impl Thresholds {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }
}

/// One evaluated indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorFinding {
    pub indicator: Indicator,
    pub severity: Severity,
    /// Normalized exceedance over the highest threshold crossed; 0 when none.
    pub magnitude: f64,
    pub persistence_days: usize,
    pub detail: String,
}

/// Final three-level label with ranked evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub asset: AssetId,
    pub report_date: NaiveDate,
    pub label: Severity,
    pub findings: Vec<IndicatorFinding>,
    /// Count of indicator families with severity above normal.
    pub scope: usize,
    pub justification: String,
}

/// Market context for one attestation event: the ±3-day window around the
/// report date plus report-day values. `window_days` carries the daily
/// snapshots the window was built from, for persistence evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventContext {
    pub asset: AssetId,
    pub report_date: NaiveDate,
    pub window: WindowAggregate,
    pub report_day_snapshot: MarketSnapshot,
    pub report_day_derived: MarketDerived,
    pub window_days: Vec<MarketSnapshot>,
}

struct RuleFire {
    severity: Severity,
    magnitude: f64,
    detail: String,
}

fn normal(detail: String) -> RuleFire {
    RuleFire {
        severity: Severity::Normal,
        magnitude: 0.0,
        detail,
    }
}

fn exceedance(observed: f64, threshold: f64) -> f64 {
    (observed - threshold) / threshold
}

fn coverage_rule(cfg: &Thresholds, coverage_ratio: f64) -> RuleFire {
    if coverage_ratio < cfg.coverage_abnormal {
        RuleFire {
            severity: Severity::Abnormal,
            magnitude: exceedance(cfg.coverage_abnormal, coverage_ratio).max(0.0),
            detail: format!(
                "coverage_ratio {coverage_ratio:.4} below {:.2} (reserve deficit)",
                cfg.coverage_abnormal
            ),
        }
    } else {
        normal(format!("coverage_ratio {coverage_ratio:.4} at or above parity"))
    }
}

fn staleness_rule(cfg: &Thresholds, age_days: i64) -> RuleFire {
    if age_days > cfg.staleness_days {
        RuleFire {
            severity: Severity::Abnormal,
            magnitude: exceedance(age_days as f64, cfg.staleness_days as f64),
            detail: format!(
                "attestation is {age_days} days old, beyond the {}-day horizon",
                cfg.staleness_days
            ),
        }
    } else {
        normal(format!("attestation age {age_days} days within horizon"))
    }
}

fn supply_gap_rule(cfg: &Thresholds, gap_pct: f64) -> RuleFire {
    let g = gap_pct.abs();
    if g > cfg.gap_abnormal {
        RuleFire {
            severity: Severity::Abnormal,
            magnitude: exceedance(g, cfg.gap_abnormal),
            detail: format!(
                "supply_gap {gap_pct:+.3}% beyond abnormal bound {:.1}%",
                cfg.gap_abnormal
            ),
        }
    } else if g > cfg.gap_suspicious {
        RuleFire {
            severity: Severity::Suspicious,
            magnitude: exceedance(g, cfg.gap_suspicious),
            detail: format!(
                "supply_gap {gap_pct:+.3}% beyond suspicious bound {:.1}%",
                cfg.gap_suspicious
            ),
        }
    } else {
        normal(format!("supply_gap {gap_pct:+.3}% within bounds"))
    }
}

fn liquidity_rule(cfg: &Thresholds, turnover: f64, volatility: f64) -> RuleFire {
    if turnover > cfg.turnover_abnormal {
        RuleFire {
            severity: Severity::Abnormal,
            magnitude: exceedance(turnover, cfg.turnover_abnormal),
            detail: format!(
                "turnover_ratio {turnover:.4} above abnormal bound {:.2}",
                cfg.turnover_abnormal
            ),
        }
    } else if turnover > cfg.turnover_suspicious && volatility > cfg.volatility_suspicious {
        RuleFire {
            severity: Severity::Suspicious,
            magnitude: exceedance(turnover, cfg.turnover_suspicious),
            detail: format!(
                "turnover_ratio {turnover:.4} with volatility {volatility:.4} indicates elevated trading stress"
            ),
        }
    } else {
        normal(format!("turnover_ratio {turnover:.4} unremarkable"))
    }
}

fn peg_rule(cfg: &Thresholds, peg_dev_pct: f64) -> RuleFire {
    let p = peg_dev_pct.abs();
    if p > cfg.peg_abnormal {
        RuleFire {
            severity: Severity::Abnormal,
            magnitude: exceedance(p, cfg.peg_abnormal),
            detail: format!(
                "peg_deviation {peg_dev_pct:+.4}% beyond abnormal bound {:.1}%",
                cfg.peg_abnormal
            ),
        }
    } else if p > cfg.peg_suspicious {
        RuleFire {
            severity: Severity::Suspicious,
            magnitude: exceedance(p, cfg.peg_suspicious),
            detail: format!(
                "peg_deviation {peg_dev_pct:+.4}% beyond suspicious bound {:.1}%",
                cfg.peg_suspicious
            ),
        }
    } else {
        normal(format!("peg_deviation {peg_dev_pct:+.4}% within band"))
    }
}

/// Peg-stress assessment for a signed deviation; used by event-study
/// reports on the window's worst day.
pub fn peg_stress_severity(cfg: &Thresholds, peg_dev_pct: f64) -> (Severity, f64) {
    let fire = peg_rule(cfg, peg_dev_pct);
    (fire.severity, fire.magnitude)
}

/// Severity a market indicator would report for one day's snapshot.
fn day_severity(
    cfg: &Thresholds,
    indicator: Indicator,
    snap: &MarketSnapshot,
    figures: &ReserveFigures,
) -> Severity {
    match indicator {
        Indicator::SupplyGap => {
            match metrics::compute_supply_gap(snap.mcap_usd, snap.price_usd, figures.circulation_rep)
            {
                Ok(gap) => supply_gap_rule(cfg, gap).severity,
                Err(_) => Severity::Normal,
            }
        }
        Indicator::LiquidityStress => match metrics::snapshot_turnover(snap) {
            Ok(t) => liquidity_rule(cfg, t, snap.volatility_daily).severity,
            Err(_) => Severity::Normal,
        },
        Indicator::PegStress => match metrics::compute_peg_deviation(snap.price_usd) {
            Ok(p) => peg_rule(cfg, p).severity,
            Err(_) => Severity::Normal,
        },
        _ => Severity::Normal,
    }
}

/// Evaluate the five indicator rules and assemble the ranked outcome.
///
/// Non-extractable inputs are a precondition violation: callers must filter
/// image-only attestations first.
pub fn classify(
    extract: &DisclosureExtract,
    ctx: &EventContext,
    cfg: &Thresholds,
    analysis_date: Option<NaiveDate>,
) -> Result<AnalysisOutcome> {
    let figures = extract.figures.as_ref().ok_or_else(|| {
        Error::domain(format!(
            "non-extractable attestation {} cannot be classified",
            extract.source_id
        ))
    })?;

    let alignment = metrics::compute_alignment(figures, &ctx.report_day_snapshot)?;
    let turnover = ctx.report_day_derived.turnover_ratio;
    let peg = ctx.report_day_derived.peg_deviation_pct;
    let volatility = ctx.report_day_snapshot.volatility_daily;
    let age_days = (analysis_date.unwrap_or(extract.report_date) - extract.report_date).num_days();

    let mut findings = Vec::with_capacity(5);
    for indicator in Indicator::all() {
        let fire = match indicator {
            Indicator::Coverage => coverage_rule(cfg, alignment.coverage_ratio),
            Indicator::AttestationQuality => staleness_rule(cfg, age_days),
            Indicator::SupplyGap => supply_gap_rule(cfg, alignment.supply_gap_pct),
            Indicator::LiquidityStress => liquidity_rule(cfg, turnover, volatility),
            Indicator::PegStress => peg_rule(cfg, peg),
        };
        let persistence_days = if fire.severity == Severity::Normal {
            0
        } else {
            match indicator {
                // attestation-level rules apply to every day of the window
                Indicator::Coverage | Indicator::AttestationQuality => ctx.window.days_present,
                _ => ctx
                    .window_days
                    .iter()
                    .filter(|snap| day_severity(cfg, indicator, snap, figures) >= fire.severity)
                    .count(),
            }
        };
        findings.push(IndicatorFinding {
            indicator,
            severity: fire.severity,
            magnitude: fire.magnitude,
            persistence_days,
            detail: fire.detail,
        });
    }

    findings.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then(b.magnitude.partial_cmp(&a.magnitude).unwrap().then(a.indicator.cmp(&b.indicator)))
    });
    let label = findings
        .iter()
        .map(|f| f.severity)
        .max()
        .unwrap_or(Severity::Normal);
    let scope = findings.iter().filter(|f| f.severity > Severity::Normal).count();
    let justification = render_justification(label, &alignment, turnover, peg, volatility, &findings);

    Ok(AnalysisOutcome {
        asset: extract.asset.clone(),
        report_date: extract.report_date,
        label,
        findings,
        scope,
        justification,
    })
}

fn render_justification(
    label: Severity,
    alignment: &crate::types::AlignmentMetrics,
    turnover: f64,
    peg: f64,
    volatility: f64,
    findings: &[IndicatorFinding],
) -> String {
    let mut s = format!(
        "label {}: coverage {:.3}, supply gap {:+.3}%, turnover {:.4}, peg deviation {:+.4}%, volatility {:.4}.",
        label.as_str(),
        alignment.coverage_ratio,
        alignment.supply_gap_pct,
        turnover,
        peg,
        volatility
    );
    let triggered: Vec<&IndicatorFinding> = findings
        .iter()
        .filter(|f| f.severity > Severity::Normal)
        .collect();
    if triggered.is_empty() {
        s.push_str(" No indicator thresholds crossed; reported reserves align with observed market activity.");
    } else {
        s.push_str(" Triggered indicators:");
        for f in triggered {
            s.push_str(&format!(
                " {} {} (magnitude {:.4}, persistence {} days; {});",
                f.indicator.as_str(),
                f.severity.as_str(),
                f.magnitude,
                f.persistence_days,
                f.detail
            ));
        }
    }
    s
}
