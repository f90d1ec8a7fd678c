//! Three-agent analysis pipeline with an auditable reasoning trace.
//!
//! Disclosure parsing, event-window retrieval, and analytical synthesis run
//! as sequential stages. Market data is fetched only through the tool
//! registry, so every value cited in the final justification traces back to
//! a logged tool call.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classify::{classify, AnalysisOutcome, EventContext, Thresholds};
use crate::error::{Error, Result};
use crate::ingest::extract::extract_disclosure;
use crate::metrics;
use crate::store::{RecordKey, Store};
use crate::tools::{ToolRegistry, TOOL_MARKET_USDC, TOOL_MARKET_USDT};
use crate::types::{AssetId, DisclosureDocument, DisclosureExtract, MarketSnapshot};

/// Window half-width around each report date, in days.
pub const EVENT_SPAN_DAYS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Thought,
    Code,
    Observation,
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: Stage,
    pub content: String,
    /// Tool-call log sequence numbers backing this step.
    pub refs: Vec<u64>,
}

/// Ordered four-stage audit log of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub run_id: String,
    pub steps: Vec<TraceStep>,
}

impl ReasoningTrace {
    fn new(run_id: String) -> Self {
        ReasoningTrace {
            run_id,
            steps: Vec::new(),
        }
    }

    fn push(&mut self, stage: Stage, content: impl Into<String>, refs: Vec<u64>) {
        self.steps.push(TraceStep {
            stage,
            content: content.into(),
            refs,
        });
    }

    /// Structural check: repeating (Thought, Code, Observation) cycles closed
    /// by exactly one trailing Finalize.
    pub fn validate(&self) -> Result<()> {
        let finalize_count = self
            .steps
            .iter()
            .filter(|s| s.stage == Stage::Finalize)
            .count();
        if finalize_count != 1 || self.steps.last().map(|s| s.stage) != Some(Stage::Finalize) {
            return Err(Error::domain(format!(
                "trace {} must end in exactly one Finalize step",
                self.run_id
            )));
        }
        let cycle = [Stage::Thought, Stage::Code, Stage::Observation];
        for (i, step) in self.steps[..self.steps.len() - 1].iter().enumerate() {
            if step.stage != cycle[i % 3] {
                return Err(Error::domain(format!(
                    "trace {} step {i} breaks the Thought/Code/Observation cycle",
                    self.run_id
                )));
            }
        }
        Ok(())
    }
}

/// Pluggable analytical synthesis. The default implementation is the
/// deterministic rule-based classifier; an external reasoning service can be
/// bridged in behind the same entry point.
pub trait ReasoningBackend {
    fn analyze(
        &self,
        extract: &DisclosureExtract,
        ctx: &EventContext,
        tools: &ToolRegistry<'_>,
    ) -> Result<AnalysisOutcome>;
}

/// Built-in backend: rule thresholds plus a templated justification.
pub struct DeterministicBackend {
    pub thresholds: Thresholds,
    /// Reference date for attestation staleness; defaults to the report date.
    pub analysis_date: Option<NaiveDate>,
}

impl DeterministicBackend {
    pub fn new(thresholds: Thresholds) -> Self {
        DeterministicBackend {
            thresholds,
            analysis_date: None,
        }
    }
}

impl ReasoningBackend for DeterministicBackend {
    fn analyze(
        &self,
        extract: &DisclosureExtract,
        ctx: &EventContext,
        _tools: &ToolRegistry<'_>,
    ) -> Result<AnalysisOutcome> {
        classify(extract, ctx, &self.thresholds, self.analysis_date)
    }
}

/// Disclosure agent: parse one raw document into structured figures,
/// appending its reasoning cycle to the trace.
pub fn agent_disclosure(
    doc: &DisclosureDocument,
    trace: &mut ReasoningTrace,
) -> Result<DisclosureExtract> {
    trace.push(
        Stage::Thought,
        format!(
            "Parse the {} attestation dated {} and extract reserve figures.",
            doc.asset, doc.report_date
        ),
        vec![],
    );
    trace.push(
        Stage::Code,
        format!("extract_disclosure(source_id={})", doc.source_id),
        vec![],
    );
    match extract_disclosure(doc) {
        Ok(extract) => {
            let obs = if extract.extractable {
                let f = extract.figures.as_ref().unwrap();
                format!(
                    "Extracted circulation {:.4e}, assets {:.4e}, liabilities {:.4e}.",
                    f.circulation_rep, f.asset_value, f.liability_value
                )
            } else {
                format!(
                    "Document {} is image-only; flagged non-extractable and excluded.",
                    doc.source_id
                )
            };
            trace.push(Stage::Observation, obs, vec![]);
            Ok(extract)
        }
        Err(e) => {
            trace.push(
                Stage::Observation,
                format!("Extraction failed: {e}"),
                vec![],
            );
            Err(e)
        }
    }
}

fn market_tool_for(asset: &AssetId) -> Result<&'static str> {
    match asset.as_str() {
        "USDT" => Ok(TOOL_MARKET_USDT),
        "USDC" => Ok(TOOL_MARKET_USDC),
        other => Err(Error::domain(format!("no market tool registered for {other}"))),
    }
}

/// Event agent: build the ±3-day market context for one report date, using
/// only tool-protocol calls.
pub fn agent_event(
    asset: &AssetId,
    report_date: NaiveDate,
    tools: &ToolRegistry<'_>,
    trace: &mut ReasoningTrace,
) -> Result<EventContext> {
    trace.push(
        Stage::Thought,
        format!(
            "Retrieve the seven-day market window around {report_date} for {asset} via the tool protocol."
        ),
        vec![],
    );
    let tool = market_tool_for(asset)?;
    trace.push(
        Stage::Code,
        format!(
            "for day in {}..={}: {tool}(day)",
            report_date - Duration::days(EVENT_SPAN_DAYS),
            report_date + Duration::days(EVENT_SPAN_DAYS)
        ),
        vec![],
    );

    let mut snapshots = Vec::new();
    let mut refs = Vec::new();
    for offset in -EVENT_SPAN_DAYS..=EVENT_SPAN_DAYS {
        let day = report_date + Duration::days(offset);
        let result = tools
            .call(tool, &json!({"date": day.to_string()}))
            .map_err(|e| Error::domain(e.0))?;
        refs.push(tools.last_seq().expect("call just logged"));
        if result.is_error {
            continue; // missing neighbor days are tolerated
        }
        let c = &result.content;
        let field = |name: &str| -> Result<f64> {
            c.get(name)
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| Error::domain(format!("tool result missing {name}")))
        };
        snapshots.push(MarketSnapshot::new(
            asset.clone(),
            day,
            field("price_usd")?,
            field("mcap_usd")?,
            field("volume_usd")?,
            field("volatility_daily")?,
        )?);
    }

    let report_day_snapshot = snapshots
        .iter()
        .find(|s| s.date == report_date)
        .cloned()
        .ok_or(Error::SnapshotNotFound {
            asset: asset.to_string(),
            date: report_date,
        });
    let report_day_snapshot = match report_day_snapshot {
        Ok(s) => s,
        Err(e) => {
            trace.push(
                Stage::Observation,
                format!("Report-day snapshot missing: {e}"),
                refs,
            );
            return Err(e);
        }
    };
    let window = metrics::aggregate_window(&snapshots, asset, report_date, EVENT_SPAN_DAYS)?;
    trace.push(
        Stage::Observation,
        format!(
            "Window covers {} days; mean price {:.6}, max |peg| {:.4}%, mcap change {:+.4e}.",
            window.days_present, window.mean_price, window.max_abs_peg_dev_pct, window.mcap_change
        ),
        refs,
    );
    Ok(EventContext {
        asset: asset.clone(),
        report_date,
        window,
        report_day_derived: metrics::derive_market(&report_day_snapshot)?,
        report_day_snapshot,
        window_days: snapshots,
    })
}

/// Analysis agent: synthesize the final outcome and close the trace.
pub fn agent_analysis(
    extract: &DisclosureExtract,
    ctx: &EventContext,
    backend: &dyn ReasoningBackend,
    tools: &ToolRegistry<'_>,
    trace: &mut ReasoningTrace,
) -> Result<AnalysisOutcome> {
    trace.push(
        Stage::Thought,
        "Integrate disclosure figures with the market window and rank indicator findings."
            .to_string(),
        vec![],
    );
    trace.push(
        Stage::Code,
        format!(
            "analyze(extract={}, window_center={})",
            extract.source_id, ctx.report_date
        ),
        vec![],
    );
    match backend.analyze(extract, ctx, tools) {
        Ok(outcome) => {
            trace.push(
                Stage::Observation,
                format!(
                    "Classifier label {} with {} triggered indicator(s).",
                    outcome.label.as_str(),
                    outcome.scope
                ),
                vec![],
            );
            let all_refs: Vec<u64> = tools.log_snapshot().iter().map(|e| e.seq).collect();
            trace.push(
                Stage::Finalize,
                format!("label={}; {}", outcome.label.as_str(), outcome.justification),
                all_refs,
            );
            Ok(outcome)
        }
        Err(e) => {
            trace.push(
                Stage::Observation,
                format!("Analysis backend failed: {e}"),
                vec![],
            );
            Err(Error::Analysis(e.to_string()))
        }
    }
}

fn abort(
    store: &Store,
    mut trace: ReasoningTrace,
    asset: &AssetId,
    report_date: NaiveDate,
    err: Error,
) -> Error {
    trace.push(
        Stage::Finalize,
        format!("aborted: {err}"),
        vec![],
    );
    // best effort: the trace up to the failure point is still persisted
    let _ = store.put(&RecordKey::trace(asset, report_date), &trace);
    err
}

/// Run disclosure → event → analysis for one (asset, report_date), persisting
/// the outcome and trace. Deterministic for the default backend.
pub fn run_pipeline(
    store: &Store,
    asset: &AssetId,
    report_date: NaiveDate,
    backend: &dyn ReasoningBackend,
) -> Result<(AnalysisOutcome, ReasoningTrace)> {
    let tools = ToolRegistry::new(store);
    let mut trace = ReasoningTrace::new(format!("{asset}-{report_date}"));

    // disclosure stage: the store holds pre-extracted attestation records
    trace.push(
        Stage::Thought,
        format!("Load the {asset} attestation reported on {report_date}."),
        vec![],
    );
    trace.push(
        Stage::Code,
        format!("store.get(attestation, {asset}, {report_date})"),
        vec![],
    );
    let key = RecordKey::attestation(asset, report_date);
    let extract: DisclosureExtract = match store.get(&key).and_then(|v| Ok(serde_json::from_value(v)?)) {
        Ok(e) => e,
        Err(e) => {
            trace.push(Stage::Observation, format!("Attestation missing: {e}"), vec![]);
            return Err(abort(store, trace, asset, report_date, e));
        }
    };
    if !extract.extractable {
        trace.push(
            Stage::Observation,
            format!(
                "Attestation {} is image-only; excluded from classification.",
                extract.source_id
            ),
            vec![],
        );
        let err = Error::domain(format!(
            "attestation {} is image-only and excluded from classification",
            extract.source_id
        ));
        return Err(abort(store, trace, asset, report_date, err));
    }
    let f = extract.figures.as_ref().unwrap();
    trace.push(
        Stage::Observation,
        format!(
            "Attestation loaded: circulation {:.4e}, assets {:.4e}, liabilities {:.4e}.",
            f.circulation_rep, f.asset_value, f.liability_value
        ),
        vec![],
    );

    let ctx = match agent_event(asset, report_date, &tools, &mut trace) {
        Ok(ctx) => ctx,
        Err(e) => return Err(abort(store, trace, asset, report_date, e)),
    };
    let outcome = match agent_analysis(&extract, &ctx, backend, &tools, &mut trace) {
        Ok(o) => o,
        Err(e) => return Err(abort(store, trace, asset, report_date, e)),
    };

    store.put(&RecordKey::outcome(asset, report_date), &outcome)?;
    store.put(&RecordKey::trace(asset, report_date), &trace)?;
    Ok((outcome, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Severity;
    use crate::types::{parse_date, MediaKind};

    fn seeded_store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let rows = [
            ("2022-05-15", 0.9995, 7.92e10, 4.5e10, 0.12),
            ("2022-05-18", 0.999645, 8.227e10, 6.479e10, 0.06349),
            ("2022-05-19", 0.9997, 8.20e10, 5.0e10, 0.08),
        ];
        for (d, p, m, v, vol) in rows {
            let snap = MarketSnapshot::new(
                AssetId::usdt(),
                parse_date(d).unwrap(),
                p,
                m,
                v,
                vol,
            )
            .unwrap();
            store
                .put(&RecordKey::market(&snap.asset, snap.date), &snap)
                .unwrap();
        }
        let extract = DisclosureExtract::new(
            AssetId::usdt(),
            parse_date("2022-05-18").unwrap(),
            Some(crate::types::ReserveFigures::new(8.219e10, 8.242e10, 8.226e10).unwrap()),
            Some("auditor".to_string()),
            "usdt-2022-05-18".to_string(),
        )
        .unwrap();
        store
            .put(
                &RecordKey::attestation(&extract.asset, extract.report_date),
                &extract,
            )
            .unwrap();
        (dir, store)
    }

    #[test]
    fn agent_event_builds_window_through_tools_only() {
        let (_d, store) = seeded_store();
        let tools = ToolRegistry::new(&store);
        let mut trace = ReasoningTrace::new("t".to_string());
        let ctx = agent_event(
            &AssetId::usdt(),
            parse_date("2022-05-18").unwrap(),
            &tools,
            &mut trace,
        )
        .unwrap();
        assert_eq!(ctx.window.days_present, 3);
        // one tool call per window day, all logged
        assert_eq!(tools.call_count(), 7);
        assert!((ctx.report_day_derived.turnover_ratio - 0.7875).abs() < 0.001);
        assert!(ctx.window.mean_turnover > 0.6 && ctx.window.mean_turnover < 0.8);
    }

    #[test]
    fn agent_event_errors_when_report_day_missing() {
        let (_d, store) = seeded_store();
        let tools = ToolRegistry::new(&store);
        let mut trace = ReasoningTrace::new("t".to_string());
        let err = agent_event(
            &AssetId::usdt(),
            parse_date("2021-01-01").unwrap(),
            &tools,
            &mut trace,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SnapshotNotFound { .. }));
    }

    #[test]
    fn pipeline_run_is_deterministic_and_persists_records() {
        let (_d, store) = seeded_store();
        let backend = DeterministicBackend::new(Thresholds::default());
        let asset = AssetId::usdt();
        let date = parse_date("2022-05-18").unwrap();
        let (outcome, trace) = run_pipeline(&store, &asset, date, &backend).unwrap();
        assert_eq!(outcome.label, Severity::Abnormal);
        trace.validate().unwrap();
        let first_outcome = store.get_raw(&RecordKey::outcome(&asset, date)).unwrap();
        let first_trace = store.get_raw(&RecordKey::trace(&asset, date)).unwrap();

        let (outcome2, trace2) = run_pipeline(&store, &asset, date, &backend).unwrap();
        assert_eq!(outcome, outcome2);
        assert_eq!(trace, trace2);
        assert_eq!(first_outcome, store.get_raw(&RecordKey::outcome(&asset, date)).unwrap());
        assert_eq!(first_trace, store.get_raw(&RecordKey::trace(&asset, date)).unwrap());
    }

    #[test]
    fn image_only_attestation_aborts_at_disclosure_stage() {
        let (_d, store) = seeded_store();
        let asset = AssetId::usdc();
        let date = parse_date("2022-06-22").unwrap();
        let stub = DisclosureExtract::new(
            asset.clone(),
            date,
            None,
            None,
            "usdc-2022-06-22".to_string(),
        )
        .unwrap();
        store.put(&RecordKey::attestation(&asset, date), &stub).unwrap();
        let backend = DeterministicBackend::new(Thresholds::default());
        let err = run_pipeline(&store, &asset, date, &backend).unwrap_err();
        assert!(err.to_string().contains("image-only"), "{err}");
        // aborted trace persisted, still well formed
        let v = store.get(&RecordKey::trace(&asset, date)).unwrap();
        let trace: ReasoningTrace = serde_json::from_value(v).unwrap();
        trace.validate().unwrap();
        assert!(trace
            .steps
            .iter()
            .any(|s| s.stage == Stage::Observation && s.content.contains("image-only")));
    }

    #[test]
    fn agent_disclosure_traces_extraction() {
        let mut trace = ReasoningTrace::new("t".to_string());
        let doc = DisclosureDocument {
            source_id: "synthetic".to_string(),
            asset: AssetId::usdt(),
            report_date: parse_date("2022-05-18").unwrap(),
            media_kind: MediaKind::Text,
            body: Some(
                "Total assets: $82.42 billion. Total liabilities: $82.26 billion. \
                 Tokens in circulation: 82,190,000,000."
                    .to_string(),
            ),
        };
        let extract = agent_disclosure(&doc, &mut trace).unwrap();
        assert!(extract.extractable);
        assert_eq!(trace.steps.len(), 3);
        assert_eq!(trace.steps[0].stage, Stage::Thought);
        assert_eq!(trace.steps[2].stage, Stage::Observation);
    }
}
