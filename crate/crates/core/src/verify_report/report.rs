use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilevel::{MarketPrices, StorageSchedule};
use crate::cpsota::FlagCensus;
use crate::presolve::AlgorithmConfig;

use super::{Overload, ProfitComparison, Verification};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// JSON schema of [`RunReport`].
pub const REPORT_SCHEMA: &str = include_str!("../../schema/run_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub iteration: usize,
    /// Algorithm step, 1 to 6
    pub step: u8,
    pub name: String,
    pub objective: Option<f64>,
    /// solver iterations summed over time steps
    pub iterations: usize,
    pub residual: Option<f64>,
    pub seconds: f64,
    pub ok: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub iteration: usize,
    pub phi_threshold: f64,
    /// largest change of `p_es`/`q_es` from the previous iteration's schedule
    pub schedule_change: f64,
    pub predicted_profit: f64,
    pub exact_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationError {
    pub predicted_cost: f64,
    pub exact_cost: f64,
    pub relative_error: f64,
    pub max_flow_error_p: f64,
    pub max_flow_error_q: f64,
}

/// Arc flows `[t][arc]`, forward arcs then reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowExtract {
    /// `branch:from->to` per arc
    pub arcs: Vec<String>,
    pub predicted_p: Vec<Vec<f64>>,
    pub predicted_q: Vec<Vec<f64>>,
    pub exact_p: Vec<Vec<f64>>,
    pub exact_q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub iteration: usize,
    pub step: u8,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub case: String,
    pub horizon: usize,
    pub config: AlgorithmConfig,
    pub stages: Vec<StageRecord>,
    pub flags: Option<FlagCensus>,
    pub approximation: Option<ApproximationError>,
    pub profit: Option<ProfitComparison>,
    pub loop_trace: Vec<LoopRecord>,
    pub schedule: Option<StorageSchedule>,
    pub predicted_prices: Option<MarketPrices>,
    pub verification: Option<Verification>,
    pub flows: Option<FlowExtract>,
    pub overloads: Vec<Overload>,
    /// Φ thresholds of re-runs triggered by overloads
    pub reruns: Vec<f64>,
    pub converged: bool,
    pub failure: Option<Failure>,
}

impl RunReport {
    pub fn new(case: &str, horizon: usize, config: &AlgorithmConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            case: case.into(),
            horizon,
            config: config.clone(),
            stages: vec![],
            flags: None,
            approximation: None,
            profit: None,
            loop_trace: vec![],
            schedule: None,
            predicted_prices: None,
            verification: None,
            flows: None,
            overloads: vec![],
            reruns: vec![],
            converged: false,
            failure: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are serializable")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Same report with every timing field zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.stages {
            s.seconds = 0.0;
        }
        r
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn csv_file(
    path: PathBuf,
    head: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<PathBuf, ReportError> {
    let wrap = |source| ReportError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
    w.write_record(head).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes `report.json` plus `schedule.csv`, `prices.csv` and `flows.csv` when available.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let json = dir.join("report.json");
    std::fs::write(&json, report.to_json() + "\n").map_err(io(&json))?;
    let mut out = vec![json];
    if let Some(s) = &report.schedule {
        out.push(csv_file(
            dir.join("schedule.csv"),
            &["t", "p_es", "q_es", "p_ch", "p_dis", "soe"],
            (0..s.horizon()).map(|t| {
                let vals = [s.p_es[t], s.q_es[t], s.p_ch[t], s.p_dis[t], s.soe[t]];
                std::iter::once(t.to_string()).chain(vals.iter().map(f64::to_string)).collect()
            }),
        )?);
    }
    if let Some(pp) = &report.predicted_prices {
        let ex = report.verification.as_ref().map(|v| &v.prices);
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        out.push(csv_file(
            dir.join("prices.csv"),
            &["t", "lmp_predicted", "qmp_predicted", "lmp_exact", "qmp_exact"],
            (0..pp.lmp.len()).map(|t| {
                vec![
                    t.to_string(),
                    pp.lmp[t].to_string(),
                    pp.qmp[t].to_string(),
                    cell(ex.map(|e| e.lmp[t])),
                    cell(ex.map(|e| e.qmp[t])),
                ]
            }),
        )?);
    }
    if let Some(f) = &report.flows {
        let rows = (0..f.predicted_p.len()).flat_map(|t| {
            f.arcs.iter().enumerate().map(move |(a, name)| {
                vec![
                    t.to_string(),
                    name.clone(),
                    f.predicted_p[t][a].to_string(),
                    f.predicted_q[t][a].to_string(),
                    f.exact_p[t][a].to_string(),
                    f.exact_q[t][a].to_string(),
                ]
            })
        });
        out.push(csv_file(
            dir.join("flows.csv"),
            &["t", "arc", "p_predicted", "q_predicted", "p_exact", "q_exact"],
            rows,
        )?);
    }
    Ok(out)
}
