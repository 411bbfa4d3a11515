//! Writing a report to disk as plot-ready tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amplify::KEY_FILE_MAGIC;
use crate::error::{Result, SkgError};
use crate::randomness::TestId;

use super::{CellReport, MismatchRow, PipelineReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = SkgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(SkgError::config(format!("unknown output format {other:?}"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const CELL_COLUMNS: [&str; 26] = [
    "scenario",
    "filter",
    "r",
    "code_rate",
    "frames",
    "calibration_frames",
    "eval_frames",
    "skipped_frames",
    "mismatch_ab",
    "mismatch_eve",
    "design_crossover",
    "eve_crossover",
    "syndrome_bits",
    "fer",
    "eve_fer",
    "h_min",
    "h_min_cond",
    "leakage",
    "leakage_raw",
    "estimator",
    "block_size",
    "samples",
    "frame_bits",
    "sampling_period_t_s",
    "key_rate_bps",
    "keys_emitted",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per cell in a fixed column order.
pub fn cells_csv(cells: &[CellReport]) -> String {
    let mut out = CELL_COLUMNS.join(",");
    for t in TestId::ALL {
        let _ = write!(out, ",nist_{}", t.as_str());
    }
    out.push_str(",error\n");
    for c in cells {
        let fields = [
            c.scenario.as_str().to_string(),
            c.filter.clone(),
            opt(c.r),
            c.code_rate.to_string(),
            c.frames.to_string(),
            c.calibration_frames.to_string(),
            c.eval_frames.to_string(),
            c.skipped_frames.to_string(),
            c.mismatch_ab.to_string(),
            opt(c.mismatch_eve),
            c.design_crossover.to_string(),
            opt(c.eve_crossover),
            c.syndrome_bits.to_string(),
            c.fer.to_string(),
            opt(c.eve_fer),
            c.h_min.to_string(),
            c.h_min_cond.to_string(),
            c.leakage.to_string(),
            c.leakage_raw.to_string(),
            c.estimator.as_str().to_string(),
            c.block_size.to_string(),
            c.samples.to_string(),
            c.frame_bits.to_string(),
            c.sampling_period_t_s.to_string(),
            c.key_rate_bps.to_string(),
            c.keys_emitted.to_string(),
        ];
        out.push_str(&fields.join(","));
        for t in TestId::ALL {
            let rate = c
                .nist_success_rates
                .as_ref()
                .and_then(|m| m.get(t.as_str()).copied().flatten());
            let _ = write!(out, ",{}", opt(rate));
        }
        let _ = writeln!(out, ",{}", csv_field(c.error.as_deref().unwrap_or("")));
    }
    out
}

pub fn mismatch_csv(rows: &[MismatchRow]) -> String {
    let mut out = String::from("scenario,filter,r,frames,mismatch_ab,mismatch_eve\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scenario.as_str(),
            r.filter,
            opt(r.r),
            r.frames,
            r.mismatch_ab,
            opt(r.mismatch_eve)
        );
    }
    out
}

fn nist_json(cells: &[CellReport]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = cells
        .iter()
        .filter_map(|c| {
            c.nist.as_ref().map(|n| {
                serde_json::json!({
                    "scenario": c.scenario,
                    "filter": c.filter,
                    "code_rate": c.code_rate,
                    "keys": c.keys_emitted,
                    "table": n.table_json(),
                })
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn nist_pvalues_csv(cells: &[CellReport]) -> String {
    let mut out = String::from("scenario,filter,code_rate,");
    let mut header_done = false;
    for c in cells {
        let Some(n) = &c.nist else { continue };
        let csv = n.pvalues_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default();
        if !header_done {
            out.push_str(header);
            out.push('\n');
            header_done = true;
        }
        for line in lines {
            let _ = writeln!(out, "{},{},{},{line}", c.scenario.as_str(), c.filter, c.code_rate);
        }
    }
    if !header_done {
        out.push_str("stream,first_key,last_key,bits,test,p1,p2,pass\n");
    }
    out
}

fn trace_csv(report: &PipelineReport) -> Option<String> {
    let t = report.trace.as_ref()?;
    let mut out = String::from("sample,normalized");
    for r in &t.r_values {
        let _ = write!(out, ",state_r{r:e},residual_r{r:e}");
    }
    out.push('\n');
    for i in 0..t.normalized.len() {
        let _ = write!(out, "{i},{}", t.normalized[i]);
        for k in 0..t.r_values.len() {
            let _ = write!(out, ",{},{}", t.states[k][i], t.residuals[k][i]);
        }
        out.push('\n');
    }
    Some(out)
}

fn trace_variance_csv(report: &PipelineReport) -> Option<String> {
    let t = report.trace.as_ref()?;
    let mut out = String::from("r,residual_variance\n");
    for (r, v) in t.r_values.iter().zip(&t.residual_variance) {
        let _ = writeln!(out, "{r:e},{v}");
    }
    Some(out)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the report tables into `dir`, creating it if needed, and returns
/// the written paths.
pub fn write_artifacts(report: &PipelineReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Csv => {
            write(dir, "cells.csv", cells_csv(&report.cells), &mut written)?;
            write(dir, "mismatch.csv", mismatch_csv(&report.mismatch), &mut written)?;
        }
        OutputFormat::Json => {
            write(dir, "cells.json", to_json(&report.cells), &mut written)?;
            write(dir, "mismatch.json", to_json(&report.mismatch), &mut written)?;
        }
    }
    write(dir, "report.json", to_json(report), &mut written)?;
    write(dir, "nist.json", to_json(&nist_json(&report.cells)), &mut written)?;
    write(dir, "nist_pvalues.csv", nist_pvalues_csv(&report.cells), &mut written)?;
    if let Some(t) = trace_csv(report) {
        write(dir, "detrend_trace.csv", t, &mut written)?;
    }
    if let Some(v) = trace_variance_csv(report) {
        write(dir, "detrend_variance.csv", v, &mut written)?;
    }
    if report.config.export_keys {
        let mut bytes = KEY_FILE_MAGIC.to_vec();
        for k in report.all_keys() {
            bytes.extend(k.to_bytes_msb());
        }
        write(dir, "keys.skgk", bytes, &mut written)?;
    }
    Ok(written)
}
