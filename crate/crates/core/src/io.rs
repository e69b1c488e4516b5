//! Line-delimited and CSV file formats.
//!
//! Diversifier inputs are JSONL: one prior record
//! `{"intents": [...], "probs": [...]}` plus one record per candidate
//! `{"item_id", "quality", "base_value", "aligned": [intent ids], "novelty"}`.
//! Slates serialize as an order record followed by one trace record per
//! position. Datasets are `{"x": {name: value}, "y": {intent: 0|1}}` lines;
//! trained parameters a single JSON document carrying the feature manifest
//! and standardization statistics. Metric tables are CSV with fixed column
//! orders so repeated runs are byte-comparable.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::divers::{BeliefSnapshot, RankedSlate, TraceStep};
use crate::error::{Error, Result};
use crate::intent::{IntentDistribution, IntentSpace};
use crate::metrics::{ArmDelta, BucketDelta, DayMetrics, ExperimentReport};
use crate::model::{Dataset, EvalReport, IntentModelParams};
use crate::sim::SessionLog;

#[derive(Debug, Serialize, Deserialize)]
struct PriorRecord {
    intents: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CandidateRecord {
    item_id: String,
    quality: f64,
    base_value: f64,
    aligned: Vec<String>,
    #[serde(default)]
    novelty: bool,
}

fn parse_err(line: usize, message: impl ToString) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

/// Reads a diversify input: exactly one prior record and at least one
/// candidate record, in any order. Errors carry 1-based line numbers.
pub fn read_diversify_input<R: BufRead>(
    reader: R,
) -> Result<(IntentSpace, IntentDistribution, Vec<Candidate>)> {
    let mut prior: Option<(usize, PriorRecord)> = None;
    let mut candidates: Vec<(usize, CandidateRecord)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
        if value.get("intents").is_some() {
            if prior.is_some() {
                return Err(parse_err(line_no, "more than one prior record"));
            }
            let record: PriorRecord =
                serde_json::from_value(value).map_err(|e| parse_err(line_no, e))?;
            prior = Some((line_no, record));
        } else if value.get("item_id").is_some() {
            let record: CandidateRecord =
                serde_json::from_value(value).map_err(|e| parse_err(line_no, e))?;
            candidates.push((line_no, record));
        } else {
            return Err(parse_err(
                line_no,
                "record is neither a prior (intents/probs) nor a candidate (item_id/...)",
            ));
        }
    }

    let (prior_line, prior) = prior.ok_or_else(|| {
        parse_err(
            0,
            "missing prior record {\"intents\": [...], \"probs\": [...]}",
        )
    })?;
    let space = IntentSpace::new(prior.intents).map_err(|e| parse_err(prior_line, e))?;
    if prior.probs.len() != space.len() {
        return Err(parse_err(
            prior_line,
            format!(
                "prior has {} probabilities for {} intents",
                prior.probs.len(),
                space.len()
            ),
        ));
    }
    let distribution =
        IntentDistribution::normalized(prior.probs).map_err(|e| parse_err(prior_line, e))?;

    if candidates.is_empty() {
        return Err(parse_err(0, "no candidate records"));
    }
    let parsed = candidates
        .into_iter()
        .map(|(line_no, r)| {
            Candidate::with_intent_names(
                r.item_id,
                r.quality,
                r.base_value,
                r.aligned.iter().map(String::as_str),
                r.novelty,
                &space,
            )
            .map_err(|e| parse_err(line_no, e))
        })
        .collect::<Result<Vec<Candidate>>>()?;
    Ok((space, distribution, parsed))
}

#[derive(Debug, Serialize, Deserialize)]
struct OrderRecord {
    order: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    position: usize,
    item_id: String,
    step_score: f64,
    marginal: f64,
    posterior: BeliefSnapshot,
}

/// Writes a ranked slate: the order record, then one trace record per
/// position with the posterior snapshot inlined.
pub fn write_slate<W: Write>(mut w: W, slate: &RankedSlate) -> Result<()> {
    serde_json::to_writer(
        &mut w,
        &OrderRecord {
            order: slate.order.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    for (i, step) in slate.trace.iter().enumerate() {
        serde_json::to_writer(
            &mut w,
            &TraceRecord {
                position: i + 1,
                item_id: step.item_id.clone(),
                step_score: step.step_score,
                marginal: step.marginal,
                posterior: step.posterior.clone(),
            },
        )?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a slate previously written by [`write_slate`].
pub fn read_slate<R: BufRead>(reader: R) -> Result<RankedSlate> {
    let mut order: Option<Vec<String>> = None;
    let mut trace: Vec<TraceStep> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if order.is_none() {
            let record: OrderRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
            order = Some(record.order);
        } else {
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
            trace.push(TraceStep {
                item_id: record.item_id,
                step_score: record.step_score,
                marginal: record.marginal,
                posterior: record.posterior,
            });
        }
    }
    let order = order.ok_or_else(|| parse_err(0, "missing order record"))?;
    Ok(RankedSlate { order, trace })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    x: BTreeMap<String, f64>,
    y: BTreeMap<String, u8>,
}

/// Reads a JSONL dataset. Feature and intent orderings are the sorted key
/// sets of the first record; every record must carry identical keys.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut dataset: Option<Dataset> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
        let ds = dataset.get_or_insert_with(|| {
            Dataset::new(
                record.x.keys().cloned().collect(),
                record.y.keys().cloned().collect(),
            )
        });
        if record.x.len() != ds.features.len()
            || !record.x.keys().zip(&ds.features).all(|(a, b)| a == b)
        {
            return Err(parse_err(line_no, "feature names differ from first record"));
        }
        if record.y.len() != ds.intents.len()
            || !record.y.keys().zip(&ds.intents).all(|(a, b)| a == b)
        {
            return Err(parse_err(line_no, "intent names differ from first record"));
        }
        let x: Vec<f64> = record.x.values().copied().collect();
        let y: Vec<u8> = record.y.values().copied().collect();
        if y.iter().any(|&b| b > 1) {
            return Err(parse_err(line_no, "labels must be 0 or 1"));
        }
        ds.push(x, y).map_err(|e| parse_err(line_no, e))?;
    }
    dataset.ok_or_else(|| parse_err(0, "empty dataset"))
}

/// Writes a dataset as JSONL with sorted feature/intent keys.
pub fn write_dataset<W: Write>(mut w: W, dataset: &Dataset) -> Result<()> {
    for e in &dataset.examples {
        let record = DatasetRecord {
            x: dataset
                .features
                .iter()
                .cloned()
                .zip(e.x.iter().copied())
                .collect(),
            y: dataset
                .intents
                .iter()
                .cloned()
                .zip(e.y.iter().copied())
                .collect(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes trained parameters as one pretty-printed JSON document.
pub fn write_params<W: Write>(mut w: W, params: &IntentModelParams) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, params)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_params<R: std::io::Read>(reader: R) -> Result<IntentModelParams> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes session logs as JSONL.
pub fn write_logs<W: Write>(mut w: W, logs: &[SessionLog]) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut w, log)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_logs<R: BufRead>(reader: R) -> Result<Vec<SessionLog>> {
    let mut logs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        logs.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?);
    }
    Ok(logs)
}

/// Serializes an experiment report as one JSON document.
pub fn write_report<W: Write>(mut w: W, report: &ExperimentReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_report<R: std::io::Read>(reader: R) -> Result<ExperimentReport> {
    Ok(serde_json::from_reader(reader)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metric names emitted per day, in column order.
const DAY_METRIC_NAMES: [&str; 11] = [
    "active_users",
    "consumption_count",
    "mean_relevance",
    "novel_impressions",
    "novel_consumptions",
    "novel_ctr",
    "repeated_exploration_count",
    "unique_clusters_per_user",
    "intent_coverage",
    "effective_intents",
    "satisfaction_mean",
];

fn day_metric_value(d: &DayMetrics, name: &str) -> String {
    match name {
        "active_users" => d.active_users.to_string(),
        "consumption_count" => d.consumption_count.to_string(),
        "mean_relevance" => d.mean_relevance.to_string(),
        "novel_impressions" => d.novel_impressions.to_string(),
        "novel_consumptions" => d.novel_consumptions.to_string(),
        "novel_ctr" => fmt_opt(d.novel_ctr),
        "repeated_exploration_count" => d.repeated_exploration_count.to_string(),
        "unique_clusters_per_user" => d.unique_clusters_per_user.to_string(),
        "intent_coverage" => d.intent_coverage.to_string(),
        "effective_intents" => d.effective_intents.to_string(),
        "satisfaction_mean" => d.satisfaction_mean.to_string(),
        other => unreachable!("unknown day metric {other}"),
    }
}

/// Day-series metric table: one row per day per metric, days ascending,
/// metrics in the documented fixed order.
pub fn write_metrics_csv<W: Write>(w: W, report: &ExperimentReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["arm", "day", "metric", "value"])?;
    for d in &report.days {
        for name in DAY_METRIC_NAMES {
            csv.write_record([
                report.arm.as_str(),
                &d.day.to_string(),
                name,
                &day_metric_value(d, name),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// One sweep row per gamma: headline diversity/novelty/relevance/DAU columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub diversity: f64,
    pub novelty: f64,
    pub relevance: f64,
    pub dau_proxy: f64,
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["gamma", "diversity", "novelty", "relevance", "dau_proxy"])?;
    for r in rows {
        csv.write_record([
            r.gamma.to_string(),
            r.diversity.to_string(),
            r.novelty.to_string(),
            r.relevance.to_string(),
            r.dau_proxy.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in csv.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Arm-comparison table with bootstrap confidence intervals.
pub fn write_compare_csv<W: Write>(w: W, rows: &[ArmDelta]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "metric",
        "control",
        "treatment",
        "delta",
        "ci_low",
        "ci_high",
    ])?;
    for r in rows {
        csv.write_record([
            r.metric.clone(),
            r.control.to_string(),
            r.treatment.to_string(),
            fmt_opt(r.delta),
            fmt_opt(r.ci_low),
            fmt_opt(r.ci_high),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Percentile-sliced novelty deltas.
pub fn write_slices_csv<W: Write>(w: W, rows: &[BucketDelta]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "bucket",
        "treatment_pages",
        "control_pages",
        "novel_impressions_delta",
        "novel_consumptions_delta",
        "novel_ctr_delta",
    ])?;
    for r in rows {
        csv.write_record([
            r.bucket.to_string(),
            r.treatment_pages.to_string(),
            r.control_pages.to_string(),
            fmt_opt(r.novel_impressions_delta),
            fmt_opt(r.novel_consumptions_delta),
            fmt_opt(r.novel_ctr_delta),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Long-format evaluation table: AUC and calibration per intent plus the
/// overall log-loss.
pub fn write_evaluation_csv<W: Write>(w: W, report: &EvalReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["metric", "intent", "value"])?;
    for e in &report.per_intent {
        csv.write_record(["auc", e.intent.as_str(), &fmt_opt(e.auc)])?;
        csv.write_record([
            "calibration_ratio",
            e.intent.as_str(),
            &fmt_opt(e.calibration_ratio),
        ])?;
    }
    csv.write_record(["log_loss", "", &report.log_loss.to_string()])?;
    csv.flush()?;
    Ok(())
}

/// Reliability bins per intent.
pub fn write_reliability_csv<W: Write>(w: W, report: &EvalReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "intent",
        "bin",
        "lo",
        "hi",
        "count",
        "mean_prediction",
        "label_rate",
    ])?;
    for e in &report.per_intent {
        for (i, b) in e.reliability.iter().enumerate() {
            csv.write_record([
                e.intent.clone(),
                i.to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
                b.mean_prediction.to_string(),
                b.label_rate.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Feature correlations sorted by |r| descending (as produced by
/// [`crate::model::feature_correlations`]).
pub fn write_correlations_csv<W: Write>(w: W, rows: &[(String, Option<f64>)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["feature", "r"])?;
    for (name, r) in rows {
        csv.write_record([name.clone(), fmt_opt(*r)])?;
    }
    csv.flush()?;
    Ok(())
}
