//! Campaign result files and their readers.
//!
//! `summary.csv` has columns `fleet_size,metric,<strategy labels...>` with a
//! `mean` and a `worst` row per fleet size; an empty cell means every trial
//! was censored. `trials.csv` has one row per trial with columns
//! [`TRIALS_HEADER`].

use std::io::{Read, Write};

use cruise_core::{CampaignResult, StrategyKind};
use serde::{Deserialize, Serialize};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const TRIALS_HEADER: [&str; 8] = [
    "fleet_size",
    "strategy",
    "trial",
    "start_node",
    "allocation_time",
    "censored",
    "decisions",
    "plans",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary<W: Write>(
    w: &mut csv::Writer<W>,
    result: &CampaignResult,
    fleet_size: usize,
) -> csv::Result<()> {
    let cells: Vec<_> = result
        .config
        .strategies
        .iter()
        .map(|&s| result.summary(s, fleet_size))
        .collect();
    let mut mean = vec![fleet_size.to_string(), "mean".to_string()];
    mean.extend(cells.iter().map(|c| cell(c.mean)));
    w.write_record(&mean)?;
    let mut worst = vec![fleet_size.to_string(), "worst".to_string()];
    worst.extend(cells.iter().map(|c| cell(c.worst)));
    w.write_record(&worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub fleet_size: usize,
    pub strategy: StrategyKind,
    pub trial: usize,
    pub start_node: usize,
    pub allocation_time: Option<f64>,
    pub censored: bool,
    pub decisions: usize,
    pub plans: usize,
}

pub fn write_trials<W: Write>(w: &mut csv::Writer<W>, result: &CampaignResult) -> csv::Result<()> {
    for r in &result.records {
        w.write_record([
            r.fleet_size.to_string(),
            r.strategy.key().to_string(),
            r.trial.to_string(),
            r.start_node.to_string(),
            cell(r.allocation_time),
            r.allocation_time.is_none().to_string(),
            r.decisions.to_string(),
            r.plans.to_string(),
        ])?;
    }
    Ok(())
}

pub fn read_trials<R: Read>(input: R) -> csv::Result<Vec<TrialRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub fleet_size: usize,
    pub metric: String,
    /// `(strategy label, value)` in column order.
    pub values: Vec<(String, Option<f64>)>,
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 3 || &header[0] != "fleet_size" || &header[1] != "metric" {
        return Err(format!("unexpected summary header {header:?}"));
    }
    let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let fleet_size = rec[0].parse().map_err(|e| format!("fleet_size: {e}"))?;
        let values = labels
            .iter()
            .zip(rec.iter().skip(2))
            .map(|(l, v)| {
                let value = if v.is_empty() {
                    None
                } else {
                    Some(v.parse::<f64>().map_err(|e| format!("{l}: {e}"))?)
                };
                Ok((l.clone(), value))
            })
            .collect::<Result<_, String>>()?;
        rows.push(SummaryRow {
            fleet_size,
            metric: rec[1].to_string(),
            values,
        });
    }
    Ok(rows)
}
