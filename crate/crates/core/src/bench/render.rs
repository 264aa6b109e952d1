//! JSON, CSV and Markdown renderings of a sweep.

use std::fmt::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, Result, SweepTable};
use crate::exec::IsaMode;
use crate::isa::InstrClass;

/// Published figure for a core this crate does not simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub core: String,
    pub configs: String,
    pub mac_per_cycle: String,
    pub note: String,
}

/// Cortex-M figures quoted in the literature. Only the aggregate numbers are
/// available, so these are bounds and one derived point, not per-config data.
pub fn reference_rows() -> Vec<ReferenceRow> {
    vec![
        ReferenceRow {
            core: "Cortex-M7".into(),
            configs: "a8w8".into(),
            mac_per_cycle: "~0.48".into(),
            note: "not simulated; baseline core reported 4.4x faster at 8 bit".into(),
        },
        ReferenceRow {
            core: "Cortex-M7".into(),
            configs: "all".into(),
            mac_per_cycle: "<= 2".into(),
            note: "not simulated; at most two 16-bit MACs per cycle".into(),
        },
        ReferenceRow {
            core: "Cortex-M4".into(),
            configs: "all".into(),
            mac_per_cycle: "<= 2".into(),
            note: "not simulated; at most two 16-bit MACs per cycle".into(),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(TableFormat::Json),
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            _ => Err(format!("unknown table format {s:?} (expected json, csv or md)")),
        }
    }
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl SweepTable {
    pub fn render(&self, format: TableFormat) -> Result<String> {
        match format {
            TableFormat::Json => self.to_json(),
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => Ok(self.to_markdown()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| BenchError::Render(e.to_string()))
    }

    /// One record per simulated cell, then the reference rows with empty counters.
    pub fn to_csv(&self) -> Result<String> {
        let err = |e: csv::Error| BenchError::Render(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config_id", "isa_mode", "simd_fmt", "cycles", "instret_total"];
        let class_cols: Vec<String> = InstrClass::ALL.iter().map(|c| format!("instret_{}", c.name())).collect();
        header.extend(class_cols.iter().map(String::as_str));
        header.extend(["mac_count", "mac_per_cycle", "oracle_match", "wall_time", "speedup", "note"]);
        w.write_record(&header).map_err(err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.config_id.clone(),
                r.isa_mode.to_string(),
                r.simd_fmt.to_string(),
                r.cycles.to_string(),
                r.instret_total().to_string(),
            ];
            rec.extend(InstrClass::ALL.iter().map(|c| r.instret.get(c.name()).copied().unwrap_or(0).to_string()));
            let speedup = match r.isa_mode {
                IsaMode::Mpic => self.speedup(&r.config_id).map(|s| format!("{s:.3}")).unwrap_or_default(),
                IsaMode::Ri5cy => String::new(),
            };
            rec.extend([
                r.mac_count.to_string(),
                format!("{:.4}", r.mac_per_cycle),
                r.oracle_match.to_string(),
                format!("{:.4}", r.wall_time),
                speedup,
                String::new(),
            ]);
            w.write_record(&rec).map_err(err)?;
        }
        let col = |name: &str| header.iter().position(|h| *h == name).expect("known column");
        for r in &self.reference {
            let mut rec = vec![String::new(); header.len()];
            rec[col("config_id")] = r.configs.clone();
            rec[col("isa_mode")] = r.core.clone();
            rec[col("mac_per_cycle")] = r.mac_per_cycle.clone();
            rec[col("note")] = r.note.clone();
            w.write_record(&rec).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Render(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Render(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| config | format | ri5cy MAC/cycle | mpic MAC/cycle | speedup | ri5cy cycles | mpic cycles |");
        let _ = writeln!(s, "|---|---|---:|---:|---:|---:|---:|");
        for sp in &self.speedups {
            let cyc = |m| self.row(&sp.config_id, m).map(|r| r.cycles).unwrap_or(0);
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:.2}x | {} | {} |",
                sp.config_id,
                sp.simd_fmt,
                sp.ri5cy_mac_per_cycle,
                sp.mpic_mac_per_cycle,
                sp.speedup,
                cyc(IsaMode::Ri5cy),
                cyc(IsaMode::Mpic),
            );
        }
        let failed: Vec<String> = self.rows.iter().filter(|r| !r.oracle_match).map(|r| r.cell()).collect();
        if !failed.is_empty() {
            let _ = writeln!(s, "\nExcluded (output mismatch): {}", failed.join(", "));
        }
        let _ = writeln!(s, "\nReference cores (not simulated):\n");
        let _ = writeln!(s, "| core | configs | MAC/cycle | note |");
        let _ = writeln!(s, "|---|---|---:|---|");
        for r in &self.reference {
            let _ = writeln!(s, "| {} | {} | {} | {} |", r.core, r.configs, r.mac_per_cycle, r.note);
        }
        s
    }
}
