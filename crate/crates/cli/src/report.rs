//! Text tables from metrics streams.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sphconv::nn::MetricRecord;

use crate::Failure;

/// Summary rows come first in this order when present.
const TABLE_REGIMES: [&str; 3] = ["NR/NR", "R/R", "NR/R"];

/// Relative tolerance between a stored summary and the recomputed accuracy.
const SUMMARY_TOLERANCE: f64 = 1e-9;

pub fn parse(source: &str, text: &str) -> Result<Vec<MetricRecord>, Failure> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::Io(format!("{source}:{}: malformed record: {e}", i + 1)))
        })
        .collect()
}

#[derive(Default)]
struct Regime {
    correct: usize,
    predictions: usize,
    summary: Option<(usize, f64)>,
}

#[derive(Debug, PartialEq)]
pub struct SummaryRow {
    pub regime: String,
    pub count: usize,
    pub accuracy: f64,
}

/// Per-regime accuracy, recomputed from prediction records where present.
pub fn summarize(records: &[MetricRecord]) -> Result<Vec<SummaryRow>, Failure> {
    let mut order: Vec<String> = Vec::new();
    let mut regimes: BTreeMap<String, Regime> = BTreeMap::new();
    for r in records {
        let regime = match r {
            MetricRecord::Prediction { regime, .. } | MetricRecord::Summary { regime, .. } => regime,
            MetricRecord::Epoch { .. } => continue,
        };
        if !regimes.contains_key(regime) {
            order.push(regime.clone());
        }
        let entry = regimes.entry(regime.clone()).or_default();
        match r {
            MetricRecord::Prediction { label, predicted, .. } => {
                entry.predictions += 1;
                entry.correct += (label == predicted) as usize;
            }
            MetricRecord::Summary { count, accuracy, .. } => entry.summary = Some((*count, *accuracy)),
            MetricRecord::Epoch { .. } => {}
        }
    }
    let mut names: Vec<String> = TABLE_REGIMES
        .iter()
        .filter(|r| regimes.contains_key(**r))
        .map(|r| r.to_string())
        .collect();
    names.extend(order.into_iter().filter(|r| !TABLE_REGIMES.contains(&r.as_str())));
    names
        .into_iter()
        .map(|name| {
            let r = &regimes[&name];
            let (count, accuracy) = if r.predictions > 0 {
                let acc = r.correct as f64 / r.predictions as f64;
                if let Some((n, stored)) = r.summary {
                    if n != r.predictions || (stored - acc).abs() > SUMMARY_TOLERANCE * acc.max(1.0) {
                        return Err(Failure::Verification(format!(
                            "regime {name}: summary says {stored} over {n}, predictions give {acc} over {}",
                            r.predictions
                        )));
                    }
                }
                (r.predictions, acc)
            } else {
                r.summary.expect("regime seen")
            };
            Ok(SummaryRow {
                regime: name,
                count,
                accuracy,
            })
        })
        .collect()
}

fn epoch_tables(source: &str, records: &[MetricRecord], out: &mut String) {
    let mut run = 0;
    let mut last = 0;
    for r in records {
        if let MetricRecord::Epoch {
            epoch,
            train_loss,
            train_acc,
            eval_acc,
        } = r
        {
            if *epoch <= last || run == 0 {
                run += 1;
                let _ = writeln!(out, "\ntraining {source} run {run}");
                let _ = writeln!(
                    out,
                    "{:>6}  {:>10}  {:>9}  {:>8}",
                    "epoch", "train_loss", "train_acc", "eval_acc"
                );
            }
            last = *epoch;
            let eval = eval_acc.map_or("-".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(out, "{epoch:>6}  {train_loss:>10.6}  {train_acc:>9.4}  {eval:>8}");
        }
    }
}

/// Epoch tables per source and training run, then one summary row per
/// regime over all sources.
pub fn render(streams: &[(String, Vec<MetricRecord>)]) -> Result<String, Failure> {
    let mut out = String::new();
    for (source, records) in streams {
        epoch_tables(source, records, &mut out);
    }
    let all: Vec<MetricRecord> = streams.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let rows = summarize(&all)?;
    let _ = writeln!(out, "\nsummary");
    let _ = writeln!(out, "{:<12}  {:>6}  {:>8}", "regime", "count", "accuracy");
    for row in rows {
        let _ = writeln!(out, "{:<12}  {:>6}  {:>8.4}", row.regime, row.count, row.accuracy);
    }
    Ok(out.trim_start().to_string())
}
