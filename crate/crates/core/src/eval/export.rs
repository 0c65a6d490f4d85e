//! Report files. Every file is written atomically and numbers use the
//! shortest round-trip representation, so identical reports give identical
//! bytes and parsing restores the exact values.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_atomic;

use super::grid::RobustnessReport;
use super::llc::LlcEstimate;
use super::smoothness::EpisodeSummary;

pub const GRID_CSV: &str = "grid.csv";
pub const GRID_META: &str = "grid.meta.json";
pub const RHO_CSV: &str = "rho.csv";
pub const SMOOTHNESS_CSV: &str = "smoothness.csv";
pub const LLC_CSV: &str = "llc.csv";

fn csv_bytes(rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Cell means as CSV: the header holds the axis-2 scales, each row starts
/// with its axis-1 scale.
pub fn grid_csv(report: &RobustnessReport) -> Vec<u8> {
    let corner = format!("{}/{}", report.grid.axis1.name(), report.grid.axis2.name());
    let mut rows = vec![std::iter::once(corner)
        .chain(report.axis2_scales.iter().map(f64::to_string))
        .collect::<Vec<_>>()];
    for (s, row) in report.axis1_scales.iter().zip(&report.cell_means) {
        rows.push(
            std::iter::once(s.to_string())
                .chain(row.iter().map(f64::to_string))
                .collect(),
        );
    }
    csv_bytes(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCsv {
    pub axis1_scales: Vec<f64>,
    pub axis2_scales: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn parse_grid_csv(bytes: &[u8]) -> Result<GridCsv> {
    let bad = |m: String| Error::InvalidInput(format!("grid csv: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let axis2_scales = header.iter().skip(1).map(num).collect::<Result<Vec<_>>>()?;
    let mut out = GridCsv {
        axis1_scales: Vec::new(),
        axis2_scales,
        values: Vec::new(),
    };
    for rec in records {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let mut fields = rec.iter();
        out.axis1_scales
            .push(num(fields.next().ok_or_else(|| bad("empty row".into()))?)?);
        let row = fields.map(num).collect::<Result<Vec<_>>>()?;
        if row.len() != out.axis2_scales.len() {
            return Err(bad(format!(
                "row has {} values, header has {}",
                row.len(),
                out.axis2_scales.len()
            )));
        }
        out.values.push(row);
    }
    Ok(out)
}

pub fn rho_csv(rho: &[f64]) -> Vec<u8> {
    let mut rows = vec![vec!["rho".to_string(), "value".to_string()]];
    rows.extend(rho.iter().enumerate().map(|(r, v)| vec![r.to_string(), v.to_string()]));
    csv_bytes(rows)
}

pub fn parse_rho_csv(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("rho csv: {e}")))?;
        let rho: usize = rec[0]
            .parse()
            .map_err(|e| Error::InvalidInput(format!("rho csv: {e}")))?;
        if rho != k {
            return Err(Error::InvalidInput(format!("rho csv: expected radius {k}, got {rho}")));
        }
        out.push(
            rec[1]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("rho csv: {e}")))?,
        );
    }
    Ok(out)
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// Writes `grid.csv`, `grid.meta.json` and `rho.csv` into `dir`.
pub fn export_heatmap(report: &RobustnessReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(GRID_CSV), &grid_csv(report))?;
    write_atomic(&dir.join(GRID_META), &to_json_bytes(report))?;
    write_atomic(&dir.join(RHO_CSV), &rho_csv(&report.rho_robustness))
}

pub fn load_report(dir: &Path) -> Result<RobustnessReport> {
    let path = dir.join(GRID_META);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-episode returns and smoothness. The `trk` column is present only
/// when the environment defines a tracking target.
pub fn smoothness_csv(episodes: &[EpisodeSummary], with_tracking: bool) -> Vec<u8> {
    let mut header: Vec<String> = ["episode", "seed", "return", "length", "diverged", "as", "sfr"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if with_tracking {
        header.push("trk".into());
    }
    let mut rows = vec![header];
    for e in episodes {
        let mut row = vec![
            e.episode.to_string(),
            e.seed.to_string(),
            e.total_reward.to_string(),
            e.length.to_string(),
            e.diverged.to_string(),
            opt(e.smoothness.map(|s| s.action_smoothness)),
            opt(e.smoothness.map(|s| s.second_order_fluctuation)),
        ];
        if with_tracking {
            row.push(opt(e.smoothness.and_then(|s| s.tracking_error)));
        }
        rows.push(row);
    }
    csv_bytes(rows)
}

/// One row per estimate, labelled with the run it came from.
pub fn llc_csv(rows: &[(String, LlcEstimate)]) -> Vec<u8> {
    let mut out = vec![[
        "run",
        "network",
        "epsilon_probe",
        "n_states",
        "n_probes",
        "sampled",
        "gradient_bound",
        "estimate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect::<Vec<_>>()];
    for (label, e) in rows {
        out.push(vec![
            label.clone(),
            e.network.name().to_string(),
            e.epsilon_probe.to_string(),
            e.n_states.to_string(),
            e.n_probes.to_string(),
            e.sampled.to_string(),
            e.gradient_bound.to_string(),
            e.estimate.to_string(),
        ]);
    }
    csv_bytes(out)
}
