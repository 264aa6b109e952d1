//! Layer benchmarks: configuration files, single-layer runs verified against
//! the reference pipeline, and the format sweep with its rendered tables.

mod config;
mod render;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{IsaMode, RunStats, Trap};
use crate::format::SimdFormat;
use crate::kernels::{build_layer_program_with, KernelError, LayerConfig, LayerData};
use crate::quant::QuantError;

pub use config::{parse_config, BenchConfig};
pub use render::{reference_rows, ReferenceRow, TableFormat};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("{cell}: {trap}")]
    Trap { cell: String, trap: Trap },
    #[error("{cell}: simulated output differs from the reference")]
    OracleMismatch { cell: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("rendering table: {0}")]
    Render(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Result of running one layer in one ISA mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_id: String,
    pub isa_mode: IsaMode,
    pub simd_fmt: SimdFormat,
    pub cycles: u64,
    pub instret: BTreeMap<String, u64>,
    /// Multiply-accumulates in the layer, excluding padding lanes.
    pub mac_count: u64,
    pub mac_per_cycle: f64,
    pub oracle_match: bool,
    /// Host seconds spent simulating.
    pub wall_time: f64,
}

impl BenchReport {
    pub fn instret_total(&self) -> u64 {
        self.instret.values().sum()
    }

    pub fn cell(&self) -> String {
        format!("{}/{}", self.config_id, self.isa_mode)
    }
}

#[derive(Debug, Clone)]
pub struct LayerRun {
    pub report: BenchReport,
    pub stats: RunStats,
}

/// Builds, runs and checks one layer. A mismatch is reported, not raised.
pub fn run_layer(cfg: &LayerConfig, mode: IsaMode, data: &LayerData) -> Result<LayerRun> {
    let lp = build_layer_program_with(cfg, mode, data)?;
    let started = Instant::now();
    let (state, stats) = lp
        .run(lp.step_budget())
        .map_err(|trap| BenchError::Trap { cell: format!("{}/{mode}", cfg.id()), trap })?;
    let wall_time = started.elapsed().as_secs_f64();
    let oracle_match = lp.output(&state) == lp.expected;
    // lanes spent on zero padding are not counted
    let mac_count = cfg.mac_count();
    let instret = stats.by_class.iter().map(|(c, n)| (c.name().to_string(), n)).collect();
    let report = BenchReport {
        config_id: cfg.id(),
        isa_mode: mode,
        simd_fmt: cfg.simd_format().expect("validated config has a format"),
        cycles: stats.cycles,
        instret,
        mac_count,
        mac_per_cycle: mac_count as f64 / stats.cycles.max(1) as f64,
        oracle_match,
        wall_time,
    };
    Ok(LayerRun { report, stats })
}

/// Every activation/weight width pair covering the 10 formats: the uniform
/// ones once and each mixed format with either tensor as the narrow operand.
pub fn sweep_configs(base: &LayerConfig) -> Vec<LayerConfig> {
    let mut out = Vec::new();
    for f in SimdFormat::ALL {
        let (a, b) = (f.width_a().bits(), f.width_b().bits());
        out.push(base.with_bits(a, b));
        if f.is_mixed() {
            out.push(base.with_bits(b, a));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub config_id: String,
    pub simd_fmt: SimdFormat,
    pub ri5cy_mac_per_cycle: f64,
    pub mpic_mac_per_cycle: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<BenchReport>,
    pub speedups: Vec<SpeedupRow>,
    pub reference: Vec<ReferenceRow>,
}

impl SweepTable {
    pub fn from_rows(rows: Vec<BenchReport>) -> Self {
        let mut speedups = Vec::new();
        for r in rows.iter().filter(|r| r.isa_mode == IsaMode::Ri5cy && r.oracle_match) {
            let m = rows
                .iter()
                .find(|m| m.isa_mode == IsaMode::Mpic && m.config_id == r.config_id && m.oracle_match);
            if let Some(m) = m {
                speedups.push(SpeedupRow {
                    config_id: r.config_id.clone(),
                    simd_fmt: r.simd_fmt,
                    ri5cy_mac_per_cycle: r.mac_per_cycle,
                    mpic_mac_per_cycle: m.mac_per_cycle,
                    speedup: m.mac_per_cycle / r.mac_per_cycle,
                });
            }
        }
        SweepTable { rows, speedups, reference: reference_rows() }
    }

    pub fn row(&self, config_id: &str, mode: IsaMode) -> Option<&BenchReport> {
        self.rows.iter().find(|r| r.config_id == config_id && r.isa_mode == mode)
    }

    pub fn speedup(&self, config_id: &str) -> Option<f64> {
        self.speedups.iter().find(|s| s.config_id == config_id).map(|s| s.speedup)
    }
}

/// Runs every sweep configuration in both modes, in parallel. Tensors are
/// synthesized per configuration from the base seed.
pub fn sweep(base: &LayerConfig) -> Result<SweepTable> {
    let cells: Vec<(LayerConfig, IsaMode)> = sweep_configs(base)
        .into_iter()
        .flat_map(|c| IsaMode::ALL.map(|m| (c.clone(), m)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|(cfg, mode)| {
            let data = LayerData::synthesize(cfg)?;
            let run = run_layer(cfg, *mode, &data)?;
            if !run.report.oracle_match {
                return Err(BenchError::OracleMismatch { cell: run.report.cell() });
            }
            Ok(run.report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_width_pairs_cover_all_formats() {
        let cfgs = sweep_configs(&LayerConfig::desk(8, 8));
        assert_eq!(cfgs.len(), 16);
        let fmts: std::collections::BTreeSet<String> =
            cfgs.iter().map(|c| c.simd_format().unwrap().to_string()).collect();
        assert_eq!(fmts.len(), 10);
        assert!(cfgs.iter().all(|c| c.out_bits == c.act_bits.min(8)));
    }

    #[test]
    fn report_invariants() {
        let cfg = LayerConfig { in_h: 4, in_w: 4, ..LayerConfig::desk(4, 2) };
        let data = LayerData::synthesize(&cfg).unwrap();
        let r = run_layer(&cfg, IsaMode::Mpic, &data).unwrap();
        let rep = &r.report;
        assert!(rep.oracle_match);
        assert_eq!(rep.mac_count, cfg.mac_count());
        assert_eq!(rep.instret_total(), r.stats.instret);
        assert!(rep.cycles >= rep.instret_total());
        assert!((rep.mac_per_cycle - rep.mac_count as f64 / rep.cycles as f64).abs() < 1e-12);
        let again = run_layer(&cfg, IsaMode::Mpic, &data).unwrap().report;
        assert_eq!(BenchReport { wall_time: 0.0, ..again }, BenchReport { wall_time: 0.0, ..rep.clone() });
    }

    #[test]
    fn speedups_need_both_modes_matching() {
        let mk = |mode, mpc: f64, ok| BenchReport {
            config_id: "a4w4".into(),
            isa_mode: mode,
            simd_fmt: "4x4".parse().unwrap(),
            cycles: 100,
            instret: BTreeMap::new(),
            mac_count: (mpc * 100.0) as u64,
            mac_per_cycle: mpc,
            oracle_match: ok,
            wall_time: 0.0,
        };
        let t = SweepTable::from_rows(vec![mk(IsaMode::Ri5cy, 1.5, true), mk(IsaMode::Mpic, 3.0, true)]);
        assert_eq!(t.speedup("a4w4"), Some(2.0));
        let t = SweepTable::from_rows(vec![mk(IsaMode::Ri5cy, 1.5, true), mk(IsaMode::Mpic, 3.0, false)]);
        assert_eq!(t.speedup("a4w4"), None);
    }
}
