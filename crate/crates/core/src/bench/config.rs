//! Flat `key = value` layer configuration files.

use std::path::{Path, PathBuf};

use super::{BenchError, Result};
use crate::kernels::{LayerConfig, LayerData};
use crate::quant::read_tensor;

/// A layer plus optional tensor files (MPQT format) replacing the synthetic ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub layer: LayerConfig,
    pub input_file: Option<PathBuf>,
    pub weights_file: Option<PathBuf>,
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = parse_config(&text)?;
        // tensor paths are relative to the config file
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.input_file, &mut cfg.weights_file].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Tensors for the layer: loaded when both files are given, synthesized otherwise.
    pub fn data(&self) -> Result<LayerData> {
        match (&self.input_file, &self.weights_file) {
            (Some(x), Some(w)) => Ok(LayerData::from_tensors(&self.layer, read_tensor(x)?, read_tensor(w)?)?),
            (None, None) => Ok(LayerData::synthesize(&self.layer)?),
            _ => Err(BenchError::Config {
                line: 0,
                msg: "input_file and weights_file must be given together".into(),
            }),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "signed" => Some(true),
        "0" | "false" | "no" | "unsigned" => Some(false),
        _ => None,
    }
}

/// Parses a config. Blank lines and `#` comments are ignored; unknown keys are
/// errors. Shape keys are required; the rest default to the desk layer's values.
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let mut layer = LayerConfig::desk(8, 8);
    let mut out_bits = None;
    let mut input_file = None;
    let mut weights_file = None;
    let mut seen = std::collections::BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| BenchError::Config { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, found {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        let num = || value.parse::<u64>().map_err(|_| err(format!("{key}: expected an integer, found {value:?}")));
        let flag = || parse_bool(value).ok_or_else(|| err(format!("{key}: expected true or false, found {value:?}")));
        match key {
            "in_h" => layer.in_h = num()? as usize,
            "in_w" => layer.in_w = num()? as usize,
            "in_c" => layer.in_c = num()? as usize,
            "out_c" => layer.out_c = num()? as usize,
            "k_h" => layer.k_h = num()? as usize,
            "k_w" => layer.k_w = num()? as usize,
            "pad" => layer.pad = num()? as usize,
            "stride" => layer.stride = num()? as usize,
            "act_bits" => layer.act_bits = num()? as u32,
            "w_bits" => layer.w_bits = num()? as u32,
            "out_bits" => out_bits = Some(num()? as u32),
            "seed" => layer.seed = num()?,
            "act_signed" => layer.act_signed = flag()?,
            "w_signed" => layer.w_signed = flag()?,
            "out_signed" => layer.out_signed = flag()?,
            "input_file" => input_file = Some(PathBuf::from(value)),
            "weights_file" => weights_file = Some(PathBuf::from(value)),
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
    }
    for key in ["in_h", "in_w", "in_c", "out_c", "k_h", "k_w"] {
        if !seen.contains(key) {
            return Err(BenchError::Config { line: 0, msg: format!("missing required key {key:?}") });
        }
    }
    layer.out_bits = out_bits.unwrap_or(layer.act_bits.min(8));
    layer
        .validate()
        .map_err(|e| BenchError::Config { line: 0, msg: e.to_string() })?;
    Ok(BenchConfig { layer, input_file, weights_file })
}
