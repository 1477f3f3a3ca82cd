//! Serialized outputs: per-feature inference tables and tidy experiment
//! tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchReport, RawRow};
use crate::config::MPConfig;
use crate::data::{Dataset, Task};
use crate::error::Result;
use crate::loco::{FeatureOutcome, InferenceReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_obs: usize,
    pub n_features: usize,
    pub task: Task,
    pub feature_names: Vec<String>,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        DatasetSummary {
            n_obs: ds.n_obs(),
            n_features: ds.n_features(),
            task: ds.task(),
            feature_names: (0..ds.n_features()).map(|j| ds.feature_name(j)).collect(),
        }
    }
}

/// Full inference output: the configuration used, the data shape and every
/// feature's outcome along with the B̂ and ε that produced the buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceDocument {
    pub config: MPConfig,
    pub dataset: DatasetSummary,
    pub report: InferenceReport,
}

pub fn write_inference_json(doc: &InferenceDocument, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct InferenceCsvRow<'a> {
    feature: usize,
    name: &'a str,
    status: &'static str,
    mean: Option<f64>,
    sd: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    statistic: Option<f64>,
    p_value: Option<f64>,
    reject: Option<bool>,
    error: Option<&'a str>,
}

/// One row per feature. Failed features keep their row with empty numeric
/// columns and the error message.
pub fn write_inference_csv(report: &InferenceReport, names: &[String], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for outcome in &report.features {
        let row = match outcome {
            FeatureOutcome::Ok(iv) => InferenceCsvRow {
                feature: iv.feature,
                name: names.get(iv.feature).map_or("", String::as_str),
                status: "ok",
                mean: Some(iv.mean),
                sd: Some(iv.sd),
                lo: Some(iv.lo),
                hi: Some(iv.hi),
                statistic: Some(iv.statistic),
                p_value: Some(iv.p_value),
                reject: Some(iv.reject),
                error: None,
            },
            FeatureOutcome::Failed { feature, error, .. } => InferenceCsvRow {
                feature: *feature,
                name: names.get(*feature).map_or("", String::as_str),
                status: "failed",
                mean: None,
                sd: None,
                lo: None,
                hi: None,
                statistic: None,
                p_value: None,
                reject: None,
                error: Some(error),
            },
        };
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Raw replicate rows as a flat table. Reports hold one row kind each.
pub fn write_bench_raw_csv(report: &BenchReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &report.raw {
        match row {
            RawRow::Interval(r) => out.serialize(r)?,
            RawRow::Test(r) => out.serialize(r)?,
            RawRow::Selection(r) => out.serialize(r)?,
            RawRow::Predictive(r) => out.serialize(r)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Summary in long form: cell, method, count, metric, value.
pub fn write_bench_summary_csv(report: &BenchReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["experiment", "cell", "method", "count", "metric", "value"])?;
    let experiment = serde_json::to_value(report.experiment)?;
    let experiment = experiment.as_str().unwrap_or_default().to_string();
    for cell in &report.summary {
        for (metric, value) in &cell.metrics {
            out.write_record([
                experiment.as_str(),
                &cell.cell,
                &cell.method,
                &cell.count.to_string(),
                metric,
                &value.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::train_ensemble;
    use crate::loco::{infer_all, InferenceOptions};
    use crate::simgen::{generate, SimModel, SimSpec};

    #[test]
    fn inference_outputs() {
        let ds = generate(&SimSpec::new(SimModel::Linear, Task::Regression, 80, 12)).unwrap();
        let summary = DatasetSummary::of(&ds);
        let cfg = MPConfig { k: 400, ..MPConfig::default() };
        let ens = train_ensemble(ds, &cfg).unwrap();
        let report = infer_all(&ens, &InferenceOptions::from_ensemble(&ens)).unwrap();

        let mut csv_out = Vec::new();
        write_inference_csv(&report, &summary.feature_names, &mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "feature,name,status,mean,sd,lo,hi,statistic,p_value,reject,error"
        );
        assert_eq!(lines.count(), 12);

        let doc = InferenceDocument { config: cfg, dataset: summary, report };
        let mut json = Vec::new();
        write_inference_json(&doc, &mut json).unwrap();
        let back: InferenceDocument = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, doc);
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert!(v["report"]["b_hat"].is_number());
        assert!(v["report"]["epsilon"].is_number());
    }

    #[test]
    fn failed_feature_row_keeps_its_place() {
        let report = InferenceReport {
            alpha: 0.1,
            effective_alpha: 0.1,
            bonferroni: false,
            b_hat: None,
            epsilon: 0.0,
            lipschitz: 1.0,
            buffer_c: 0.0,
            n: 2,
            m: 1,
            k: 3,
            n_obs: 4,
            features: vec![FeatureOutcome::Failed {
                feature: 0,
                coverage_failure: true,
                error: "feature 0 never excluded".into(),
            }],
        };
        let mut out = Vec::new();
        write_inference_csv(&report, &["a".into()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0,a,failed,,,,,,,,feature 0 never excluded");
    }
}
