//! Uniform quantization, sub-byte packing and the integer reference pipeline
//! (convolution followed by requantization) that every kernel is checked against.

mod file;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::LaneWidth;

pub use file::{read_tensor, read_tensor_from, write_tensor, write_tensor_to};

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("lane value {value} does not fit in {nbits} bits")]
    LaneOutOfRange { value: i64, nbits: u32 },
    #[error("unsupported bit width {0} (expected 2, 4, 8 or 16)")]
    BadWidth(u32),
    #[error("tensor file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QuantError>;

fn lane_width(nbits: u32) -> Result<LaneWidth> {
    LaneWidth::from_bits(nbits).ok_or(QuantError::BadWidth(nbits))
}

/// Smallest and largest code of an `nbits` integer of the given signedness.
pub fn code_range(nbits: u32, signed: bool) -> (i32, i32) {
    if signed {
        (-(1 << (nbits - 1)), (1 << (nbits - 1)) - 1)
    } else {
        (0, ((1u32 << nbits) - 1) as i32)
    }
}

/// Real-valued range `[alpha, beta)` split into `2^nbits` equal steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub nbits: u32,
    pub signed: bool,
}

impl QuantParams {
    pub fn new(alpha: f64, beta: f64, nbits: u32, signed: bool) -> Result<Self> {
        lane_width(nbits)?;
        if !(beta > alpha) || !alpha.is_finite() || !beta.is_finite() {
            return Err(QuantError::InvalidParams(format!("need beta > alpha, got [{alpha}, {beta})")));
        }
        let eps = (beta - alpha) / f64::from(1u32 << nbits);
        Ok(QuantParams { alpha, beta, eps, nbits, signed })
    }

    /// Builds the range from its lower bound and step.
    pub fn from_step(alpha: f64, eps: f64, nbits: u32, signed: bool) -> Result<Self> {
        lane_width(nbits)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(QuantError::InvalidParams(format!("step must be positive, got {eps}")));
        }
        Ok(QuantParams { alpha, beta: alpha + eps * f64::from(1u32 << nbits), eps, nbits, signed })
    }

    /// Stored codes are the grid index shifted down by this amount.
    pub fn code_offset(&self) -> i32 {
        if self.signed {
            1 << (self.nbits - 1)
        } else {
            0
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(QuantError::InvalidParams(format!("step must be positive, got {}", self.eps)));
        }
        lane_width(self.nbits).map(|_| ())
    }

    pub fn quantize_one(&self, t: f64) -> i32 {
        let max = ((1u64 << self.nbits) - 1) as f64;
        let idx = ((t - self.alpha) / self.eps).floor().clamp(0.0, max);
        idx as i32 - self.code_offset()
    }

    pub fn dequantize_one(&self, code: i32) -> f64 {
        self.alpha + self.eps * f64::from(code + self.code_offset())
    }
}

/// Integer tensor stored as a packed little-endian lane stream, channel fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub nbits: u32,
    pub signed: bool,
    pub data: Vec<u32>,
}

impl QuantizedTensor {
    pub fn from_values(shape: &[usize], values: &[i32], nbits: u32, signed: bool) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(QuantError::ShapeMismatch(format!(
                "shape {shape:?} holds {n} values, got {}",
                values.len()
            )));
        }
        let (lo, hi) = code_range(nbits, signed);
        if let Some(&v) = values.iter().find(|&&v| v < lo || v > hi) {
            return Err(QuantError::LaneOutOfRange { value: v.into(), nbits });
        }
        Ok(QuantizedTensor { shape: shape.to_vec(), nbits, signed, data: pack(values, nbits)? })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<i32> {
        let mut v = unpack(&self.data, self.nbits, self.signed);
        v.truncate(self.len());
        v
    }

    pub fn get(&self, index: usize) -> i32 {
        let lanes = 32 / self.nbits as usize;
        let word = self.data[index / lanes];
        let sh = (index % lanes) as u32 * self.nbits;
        let raw = (word >> sh) & ((1u64 << self.nbits) - 1) as u32;
        if self.signed {
            ((raw << (32 - self.nbits)) as i32) >> (32 - self.nbits)
        } else {
            raw as i32
        }
    }

    /// Uniformly random codes over the full range of the format.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], nbits: u32, signed: bool) -> Result<Self> {
        lane_width(nbits)?;
        let (lo, hi) = code_range(nbits, signed);
        let n: usize = shape.iter().product();
        let values: Vec<i32> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
        Self::from_values(shape, &values, nbits, signed)
    }
}

/// Packs lanes into 32-bit words, lane 0 in the least significant bits. Values
/// may be given in either the signed or the unsigned range of `nbits`.
pub fn pack(lanes: &[i32], nbits: u32) -> Result<Vec<u32>> {
    let w = lane_width(nbits)?;
    let per = w.lanes();
    let lo = -(1i64 << (nbits - 1));
    let hi = (1i64 << nbits) - 1;
    let mut out = vec![0u32; lanes.len().div_ceil(per)];
    for (i, &v) in lanes.iter().enumerate() {
        if i64::from(v) < lo || i64::from(v) > hi {
            return Err(QuantError::LaneOutOfRange { value: v.into(), nbits });
        }
        out[i / per] |= (v as u32 & w.mask()) << ((i % per) as u32 * nbits);
    }
    Ok(out)
}

/// Inverse of [`pack`]; returns every lane of every word.
pub fn unpack(words: &[u32], nbits: u32, signed: bool) -> Vec<i32> {
    let per = (32 / nbits) as usize;
    let mut out = Vec::with_capacity(words.len() * per);
    for &word in words {
        for l in 0..per as u32 {
            let raw = (word >> (l * nbits)) & ((1u64 << nbits) - 1) as u32;
            out.push(if signed {
                ((raw << (32 - nbits)) as i32) >> (32 - nbits)
            } else {
                raw as i32
            });
        }
    }
    out
}

pub fn quantize(t: &[f64], shape: &[usize], p: &QuantParams) -> Result<QuantizedTensor> {
    p.check()?;
    let codes: Vec<i32> = t.iter().map(|&v| p.quantize_one(v)).collect();
    QuantizedTensor::from_values(shape, &codes, p.nbits, p.signed)
}

pub fn dequantize(q: &QuantizedTensor, p: &QuantParams) -> Result<Vec<f64>> {
    p.check()?;
    if q.nbits != p.nbits || q.signed != p.signed {
        return Err(QuantError::InvalidParams(format!(
            "tensor is {}-bit {}, params are {}-bit {}",
            q.nbits,
            if q.signed { "signed" } else { "unsigned" },
            p.nbits,
            if p.signed { "signed" } else { "unsigned" },
        )));
    }
    Ok(q.values().into_iter().map(|c| p.dequantize_one(c)).collect())
}

/// 32-bit convolution output, shape (H, W, K) with channel fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccTensor {
    pub shape: [usize; 3],
    pub data: Vec<i32>,
}

impl AccTensor {
    pub fn at(&self, y: usize, x: usize, k: usize) -> i32 {
        self.data[(y * self.shape[1] + x) * self.shape[2] + k]
    }
}

/// Output spatial size of a convolution, or `None` if the kernel does not fit.
pub fn conv_out_dim(input: usize, kernel: usize, pad: usize, stride: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Integer cross-correlation of an (H, W, C) input with (K, kH, kW, C)
/// filters under zero padding. Sums are exact and wrapped to 32 bits at the end.
pub fn golden_conv(x: &QuantizedTensor, w: &QuantizedTensor, pad: usize, stride: usize) -> Result<AccTensor> {
    let [h, wd, c] = match x.shape[..] {
        [a, b, c] => [a, b, c],
        _ => return Err(QuantError::ShapeMismatch(format!("input must be (H, W, C), got {:?}", x.shape))),
    };
    let [k, kh, kw, wc] = match w.shape[..] {
        [a, b, c, d] => [a, b, c, d],
        _ => return Err(QuantError::ShapeMismatch(format!("weights must be (K, kH, kW, C), got {:?}", w.shape))),
    };
    if wc != c {
        return Err(QuantError::ShapeMismatch(format!("input has {c} channels, weights {wc}")));
    }
    let (oh, ow) = match (conv_out_dim(h, kh, pad, stride), conv_out_dim(wd, kw, pad, stride)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(QuantError::ShapeMismatch(format!("{kh}x{kw} kernel does not fit {h}x{wd} input"))),
    };
    let xv = x.values();
    let wv = w.values();
    let mut data = Vec::with_capacity(oh * ow * k);
    for oy in 0..oh {
        for ox in 0..ow {
            for f in 0..k {
                let mut acc: i64 = 0;
                for dy in 0..kh {
                    let iy = (oy * stride + dy) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for dx in 0..kw {
                        let ix = (ox * stride + dx) as isize - pad as isize;
                        if ix < 0 || ix >= wd as isize {
                            continue;
                        }
                        let xb = (iy as usize * wd + ix as usize) * c;
                        let wb = ((f * kh + dy) * kw + dx) * c;
                        for ch in 0..c {
                            acc += i64::from(xv[xb + ch]) * i64::from(wv[wb + ch]);
                        }
                    }
                }
                data.push(acc as i32);
            }
        }
    }
    Ok(AccTensor { shape: [oh, ow, k], data })
}

/// Per-channel increasing thresholds; the output code is how many are ≤ φ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub out_bits: u32,
    pub channels: Vec<Vec<i32>>,
}

impl ThresholdSet {
    pub fn new(out_bits: u32, channels: Vec<Vec<i32>>) -> Result<Self> {
        lane_width(out_bits)?;
        let need = (1usize << out_bits) - 1;
        for (i, t) in channels.iter().enumerate() {
            if t.len() != need {
                return Err(QuantError::InvalidParams(format!(
                    "channel {i}: {}-bit output needs {need} thresholds, got {}",
                    out_bits,
                    t.len()
                )));
            }
            if t.windows(2).any(|p| p[0] >= p[1]) {
                return Err(QuantError::InvalidParams(format!("channel {i}: thresholds not strictly increasing")));
            }
        }
        if channels.is_empty() {
            return Err(QuantError::InvalidParams("no threshold channels".into()));
        }
        Ok(ThresholdSet { out_bits, channels })
    }

    /// Thresholds for channel `k`; a single-channel set applies to all channels.
    pub fn channel(&self, k: usize) -> &[i32] {
        if self.channels.len() == 1 {
            &self.channels[0]
        } else {
            &self.channels[k]
        }
    }

    /// Unsigned code of φ: the number of thresholds at or below it.
    pub fn code(&self, k: usize, phi: i32) -> i32 {
        self.channel(k).partition_point(|&t| t <= phi) as i32
    }
}

/// Per-channel `clamp((φ + bias) >> shift, lo, hi)` in 32-bit arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleClampParams {
    pub bias: Vec<i32>,
    pub shift: u32,
    pub lo: i32,
    pub hi: i32,
}

impl ScaleClampParams {
    pub fn new(bias: Vec<i32>, shift: u32, lo: i32, hi: i32) -> Result<Self> {
        if lo >= hi {
            return Err(QuantError::InvalidParams(format!("clamp range [{lo}, {hi}] is empty")));
        }
        if shift >= 32 {
            return Err(QuantError::InvalidParams(format!("shift {shift} out of range")));
        }
        if bias.is_empty() {
            return Err(QuantError::InvalidParams("no bias channels".into()));
        }
        Ok(ScaleClampParams { bias, shift, lo, hi })
    }

    /// Round-to-nearest requantization onto the grid `alpha + k * 2^shift`,
    /// yielding unsigned codes `[0, 2^out_bits)`.
    pub fn from_grid(alpha: i32, shift: u32, out_bits: u32) -> Result<Self> {
        let half = if shift == 0 { 0 } else { 1i32 << (shift - 1) };
        Self::new(vec![half.wrapping_sub(alpha)], shift, 0, ((1u32 << out_bits) - 1) as i32)
    }

    pub fn bias_for(&self, k: usize) -> i32 {
        if self.bias.len() == 1 {
            self.bias[0]
        } else {
            self.bias[k]
        }
    }

    pub fn apply(&self, k: usize, phi: i32) -> i32 {
        (phi.wrapping_add(self.bias_for(k)) >> self.shift).clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Requant {
    Thresholds(ThresholdSet),
    ScaleClamp(ScaleClampParams),
}

impl Requant {
    /// Output code of channel `k`, before any signed offset.
    pub fn code(&self, k: usize, phi: i32) -> i32 {
        match self {
            Requant::Thresholds(t) => t.code(k, phi),
            Requant::ScaleClamp(s) => s.apply(k, phi),
        }
    }
}

/// Requantizes accumulators to `out_bits`. Threshold codes are unsigned and are
/// shifted down by `2^(out_bits-1)` when `out_signed`; scale-clamp codes are
/// taken as they are and must fit the output range.
pub fn golden_quant(phi: &AccTensor, how: &Requant, out_bits: u32, out_signed: bool) -> Result<QuantizedTensor> {
    lane_width(out_bits)?;
    let k = phi.shape[2];
    match how {
        Requant::Thresholds(t) => {
            if t.out_bits != out_bits {
                return Err(QuantError::InvalidParams(format!(
                    "thresholds are for {}-bit output, requested {out_bits}",
                    t.out_bits
                )));
            }
            if t.channels.len() != 1 && t.channels.len() != k {
                return Err(QuantError::ShapeMismatch(format!("{} threshold channels for {k} outputs", t.channels.len())));
            }
        }
        Requant::ScaleClamp(s) => {
            let (lo, hi) = code_range(out_bits, out_signed);
            if s.lo < lo || s.hi > hi {
                return Err(QuantError::InvalidParams(format!(
                    "clamp [{}, {}] exceeds {out_bits}-bit output range",
                    s.lo, s.hi
                )));
            }
            if s.bias.len() != 1 && s.bias.len() != k {
                return Err(QuantError::ShapeMismatch(format!("{} bias channels for {k} outputs", s.bias.len())));
            }
        }
    }
    let offset = match how {
        Requant::Thresholds(_) if out_signed => 1 << (out_bits - 1),
        _ => 0,
    };
    let codes: Vec<i32> = phi.data.iter().enumerate().map(|(i, &p)| how.code(i % k, p) - offset).collect();
    QuantizedTensor::from_values(&phi.shape, &codes, out_bits, out_signed)
}

/// Thresholds at the code boundaries of the round-to-nearest grid described by
/// `p` (lower bound `alpha`, step `eps`): threshold `k` is the smallest integer
/// φ whose code exceeds `k`.
pub fn make_thresholds(p: &QuantParams, out_bits: u32) -> Result<ThresholdSet> {
    ThresholdSet::new(out_bits, vec![threshold_row(p, out_bits)?])
}

/// One threshold row per output channel.
pub fn make_channel_thresholds(params: &[QuantParams], out_bits: u32) -> Result<ThresholdSet> {
    let rows = params.iter().map(|p| threshold_row(p, out_bits)).collect::<Result<Vec<_>>>()?;
    ThresholdSet::new(out_bits, rows)
}

fn threshold_row(p: &QuantParams, out_bits: u32) -> Result<Vec<i32>> {
    p.check()?;
    if !matches!(out_bits, 2 | 4) {
        return Err(QuantError::InvalidParams(format!("thresholds are used for 2/4-bit outputs, not {out_bits}")));
    }
    let n = (1usize << out_bits) - 1;
    let row: Vec<i32> = (0..n)
        .map(|k| (p.alpha + p.eps * (k as f64 + 0.5)).ceil().clamp(i32::MIN as f64, i32::MAX as f64) as i32)
        .collect();
    if row.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QuantError::InvalidParams(format!("step {} too small for distinct integer thresholds", p.eps)));
    }
    Ok(row)
}
