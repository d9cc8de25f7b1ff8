//! Evaluation reports: one CSV row of aggregated metrics per category.
//!
//! Columns: `category,cd_x1e4,f1,ucd_x1e4,mmd_x1e2,tau`. The ground-
//! truth-dependent columns (`cd_x1e4`, `f1`) are empty in the
//! no-ground-truth regime. Values use shortest round-trip formatting,
//! so a decoded report reproduces the written numbers exactly.

use std::path::Path;

use super::{read_bytes, write_bytes, FormatViolation};
use crate::error::Result;

/// CSV header line.
pub const REPORT_HEADER: &str = "category,cd_x1e4,f1,ucd_x1e4,mmd_x1e2,tau";

/// Aggregated metrics for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Shape category.
    pub category: String,
    /// Mean Chamfer distance versus ground truth, scaled by 1e4.
    pub cd_x1e4: Option<f64>,
    /// Mean F1 score versus ground truth, in [0, 1].
    pub f1: Option<f64>,
    /// Mean unidirectional Chamfer (input into completion), scaled by 1e4.
    pub ucd_x1e4: f64,
    /// Minimal matching distance of the completion set, scaled by 1e2.
    pub mmd_x1e2: f64,
    /// F1 distance threshold the row was computed at.
    pub tau: f64,
}

/// Serializes a report.
pub fn encode_report(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.category,
            opt(r.cd_x1e4),
            opt(r.f1),
            r.ucd_x1e4,
            r.mmd_x1e2,
            r.tau
        ));
    }
    out
}

/// Parses a report, requiring the exact header.
pub fn decode_report(text: &str) -> core::result::Result<Vec<ReportRow>, FormatViolation> {
    let base = text.as_ptr() as usize;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().map(|l| l.trim_end_matches('\n'));
    if header != Some(REPORT_HEADER) {
        return Err(FormatViolation::at(0, format!("bad header, expected `{REPORT_HEADER}`")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let off = (line.as_ptr() as usize - base) as u64;
        let body = line.trim_end_matches('\n');
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split(',').collect();
        if cols.len() != 6 {
            return Err(FormatViolation::at(off, format!("expected 6 columns, got {}", cols.len())));
        }
        let req = |s: &str, name: &str| -> core::result::Result<f64, FormatViolation> {
            s.parse()
                .map_err(|_| FormatViolation::at(off, format!("bad {name} value `{s}`")))
        };
        let opt = |s: &str, name: &str| -> core::result::Result<Option<f64>, FormatViolation> {
            if s.is_empty() { Ok(None) } else { req(s, name).map(Some) }
        };
        rows.push(ReportRow {
            category: cols[0].to_string(),
            cd_x1e4: opt(cols[1], "cd_x1e4")?,
            f1: opt(cols[2], "f1")?,
            ucd_x1e4: req(cols[3], "ucd_x1e4")?,
            mmd_x1e2: req(cols[4], "mmd_x1e2")?,
            tau: req(cols[5], "tau")?,
        });
    }
    Ok(rows)
}

/// Writes a report file.
pub fn save_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_bytes(path, encode_report(rows).as_bytes())
}

/// Reads a report file.
pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    let bytes = read_bytes(path)?;
    let text = core::str::from_utf8(&bytes).map_err(|e| {
        FormatViolation::at(e.valid_up_to() as u64, "not valid UTF-8").into_error(path)
    })?;
    decode_report(text).map_err(|v| v.into_error(path))
}
