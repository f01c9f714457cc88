//! Run results: per-client rows, aggregates, CSV and JSON output.
//!
//! CSV columns, in order: `algorithm, b_max, preference_ratio, offload_ratio,
//! client, fps, lambda1, lambda2, l_max, f, s, b, energy, latency, accuracy,
//! q, offload_fraction, offloaded_mb, mean_iou, feasible, frames, detects,
//! e_obj, e_trk, total_energy`. Empty cells mark
//! quantities that do not apply to the run.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf::Allocation;
use crate::scenario::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRow {
    pub algorithm: Algorithm,
    pub b_max: f64,
    pub preference_ratio: Option<f64>,
    pub offload_ratio: Option<f64>,
    pub client: usize,
    pub fps: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    pub l_max: f64,
    /// CPU frequency, GHz.
    pub f: f64,
    /// Model size, px.
    pub s: f64,
    /// Bandwidth, Mbps.
    pub b: f64,
    /// Mean energy per frame, J.
    pub energy: f64,
    /// Mean service latency per frame, s.
    pub latency: f64,
    pub accuracy: f64,
    /// Objective term at the client's configuration.
    pub q: f64,
    pub offload_fraction: f64,
    /// Mean offloaded data per frame, Mb.
    pub offloaded_mb: f64,
    pub mean_iou: Option<f64>,
    pub feasible: bool,
    /// Simulated frames, offloading runs only.
    pub frames: Option<u64>,
    /// Frames sent for detection, offloading runs only.
    pub detects: Option<u64>,
    /// Energy charged per detection, J.
    pub e_obj: Option<f64>,
    /// Energy charged per tracked frame, J.
    pub e_trk: Option<f64>,
    /// `detects * e_obj + (frames - detects) * e_trk`, J.
    pub total_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_energy: f64,
    pub mean_latency: f64,
    pub mean_accuracy: f64,
    /// Sum of per-client objective terms.
    pub total_q: f64,
    pub mean_offload_fraction: f64,
    pub total_offloaded_mb: f64,
    pub mean_iou: Option<f64>,
}

impl Aggregate {
    pub fn from_rows(rows: &[ClientRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |get: fn(&ClientRow) -> f64| rows.iter().map(get).sum::<f64>() / n;
        let ious: Option<Vec<f64>> = rows.iter().map(|r| r.mean_iou).collect();
        Self {
            mean_energy: mean(|r| r.energy),
            mean_latency: mean(|r| r.latency),
            mean_accuracy: mean(|r| r.accuracy),
            total_q: rows.iter().map(|r| r.q).sum(),
            mean_offload_fraction: mean(|r| r.offload_fraction),
            total_offloaded_mb: rows.iter().map(|r| r.offloaded_mb).sum(),
            mean_iou: ious
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub algorithm: Algorithm,
    pub b_max: f64,
    pub preference_ratio: Option<f64>,
    pub offload_ratio: Option<f64>,
    pub rows: Vec<ClientRow>,
    pub aggregate: Aggregate,
    /// Clients whose latency bounds could not be met together; empty when feasible.
    pub infeasible_clients: Vec<usize>,
    /// Solver output, when the run used the optimizer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Allocation>,
}

impl Report {
    pub fn is_feasible(&self) -> bool {
        self.infeasible_clients.is_empty()
    }
}

pub fn write_csv<W: Write>(writer: W, reports: &[Report]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        for row in &r.rows {
            w.serialize(row)?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn to_csv_string(reports: &[Report]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn to_json_string(reports: &[Report]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn read_csv_rows(text: &str) -> Result<Vec<ClientRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn render(reports: &[Report], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv_string(reports),
        Format::Json => to_json_string(reports),
    }
}

pub fn write_file(path: impl AsRef<Path>, reports: &[Report], format: Format) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render(reports, format)?).map_err(|e| Error::io(path, e))
}
