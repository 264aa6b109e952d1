//! Convolution kernels in three phases (im2col, 4x2 MatMul, QntPack) generated
//! as assembly for either ISA mode, together with the data image they run on
//! and the reference output they must reproduce.

mod emit;
mod layout;

use std::fmt;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::AsmError;
use crate::exec::IsaMode;
use crate::format::{LaneWidth, SignMode, SimdFormat};
use crate::quant::{
    conv_out_dim, golden_conv, golden_quant, make_channel_thresholds, AccTensor, QuantError, QuantParams,
    QuantizedTensor, Requant, ScaleClampParams,
};

pub use emit::{build_layer_program, build_layer_program_with, gen_im2col, gen_matmul, gen_qntpack, LayerProgram};
pub use layout::MemoryLayout;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid layer config: {0}")]
    Config(String),
    #[error("no kernel plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("generated assembly rejected: {0}")]
    Asm(#[from] AsmError),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// One convolution layer: shapes, bit widths and the seed for synthetic tensors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub pad: usize,
    pub stride: usize,
    pub act_bits: u32,
    pub w_bits: u32,
    pub out_bits: u32,
    pub act_signed: bool,
    pub w_signed: bool,
    pub out_signed: bool,
    pub seed: u64,
}

impl LayerConfig {
    /// 8x8x16 input, 16 filters of 3x3x16, pad 1.
    pub fn desk(act_bits: u32, w_bits: u32) -> Self {
        LayerConfig {
            in_h: 8,
            in_w: 8,
            in_c: 16,
            out_c: 16,
            k_h: 3,
            k_w: 3,
            pad: 1,
            stride: 1,
            act_bits,
            w_bits,
            out_bits: act_bits.min(8),
            act_signed: false,
            w_signed: false,
            out_signed: false,
            seed: 1,
        }
    }

    /// 16x16x32 input, 64 filters of 3x3x32, pad 1.
    pub fn benchmark(act_bits: u32, w_bits: u32) -> Self {
        LayerConfig { in_h: 16, in_w: 16, in_c: 32, out_c: 64, ..LayerConfig::desk(act_bits, w_bits) }
    }

    pub fn with_bits(&self, act_bits: u32, w_bits: u32) -> Self {
        LayerConfig { act_bits, w_bits, out_bits: act_bits.min(8), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KernelError::Config(m));
        for (name, b) in [("act_bits", self.act_bits), ("w_bits", self.w_bits)] {
            if LaneWidth::from_bits(b).is_none() {
                return bad(format!("{name} = {b}, expected 2, 4, 8 or 16"));
            }
        }
        if !matches!(self.out_bits, 2 | 4 | 8) {
            return bad(format!("out_bits = {}, expected 2, 4 or 8", self.out_bits));
        }
        if self.in_c == 0 || self.out_c == 0 || self.in_h == 0 || self.in_w == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.stride == 0 {
            return bad("stride must be positive".into());
        }
        if self.out_h() == 0 || self.out_w() == 0 {
            return bad(format!("{}x{} kernel does not fit the padded input", self.k_h, self.k_w));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        conv_out_dim(self.in_h, self.k_h, self.pad, self.stride).unwrap_or(0)
    }

    pub fn out_w(&self) -> usize {
        conv_out_dim(self.in_w, self.k_w, self.pad, self.stride).unwrap_or(0)
    }

    pub fn mac_count(&self) -> u64 {
        (self.out_h() * self.out_w() * self.out_c * self.k_h * self.k_w * self.in_c) as u64
    }

    /// The operand precision pair with the wider tensor as operand A.
    pub fn simd_format(&self) -> Option<SimdFormat> {
        SimdFormat::from_bits(self.act_bits.max(self.w_bits), self.act_bits.min(self.w_bits))
    }

    /// Short identifier such as `a8w4`.
    pub fn id(&self) -> String {
        format!("a{}w{}", self.act_bits, self.w_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperandRole {
    Weights,
    Activations,
}

impl fmt::Display for OperandRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperandRole::Weights => "weights",
            OperandRole::Activations => "activations",
        })
    }
}

/// How a layer maps onto the dot-product hardware in one ISA mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelPlan {
    pub mode: IsaMode,
    /// Format the MatMul runs at: the native mixed pair in mpic mode, the
    /// uniform compute width in ri5cy mode.
    pub simd_fmt: SimdFormat,
    /// Which tensor feeds operand B: the narrower one, weights on ties.
    pub b_role: OperandRole,
    /// Consecutive MACs per operand-B subgroup in the main 4x2 block.
    pub macs_per_group: u32,
    /// Activations are widened to the compute width while building the patch.
    pub im2col_unpack: bool,
    /// Compute words produced from each packed weight word inside the MatMul
    /// loop (1 means no unpacking).
    pub weight_unpack: u32,
    pub sign: SignMode,
    /// Activations go to rs1 of the dot product, weights to rs2.
    pub act_is_rs1: bool,
}

impl KernelPlan {
    pub fn new(cfg: &LayerConfig, mode: IsaMode) -> Result<Self> {
        cfg.validate()?;
        let b_role = if cfg.w_bits <= cfg.act_bits { OperandRole::Weights } else { OperandRole::Activations };
        let native = cfg
            .simd_format()
            .ok_or_else(|| KernelError::Plan(format!("{}x{} is not a SIMD format", cfg.act_bits, cfg.w_bits)))?;
        match mode {
            IsaMode::Mpic => {
                let act_is_rs1 = b_role == OperandRole::Weights;
                let (a_s, b_s) = if act_is_rs1 {
                    (cfg.act_signed, cfg.w_signed)
                } else {
                    (cfg.w_signed, cfg.act_signed)
                };
                let sign = SignMode::for_operands(a_s, b_s).ok_or_else(|| {
                    KernelError::Plan(format!(
                        "format {native} puts signed {} in operand A and unsigned {} in operand B; \
                         no dot product takes signed A with unsigned B",
                        if act_is_rs1 { "activations" } else { "weights" },
                        if act_is_rs1 { "weights" } else { "activations" },
                    ))
                })?;
                Ok(KernelPlan {
                    mode,
                    simd_fmt: native,
                    b_role,
                    macs_per_group: 8,
                    im2col_unpack: false,
                    weight_unpack: 1,
                    sign,
                    act_is_rs1,
                })
            }
            IsaMode::Ri5cy => {
                let cw = if cfg.act_bits.max(cfg.w_bits) == 16 { 16 } else { 8 };
                let (sign, act_is_rs1) = match SignMode::for_operands(cfg.act_signed, cfg.w_signed) {
                    Some(s) => (s, true),
                    None => (SignMode::Us, false),
                };
                Ok(KernelPlan {
                    mode,
                    simd_fmt: SimdFormat::uniform(LaneWidth::from_bits(cw).unwrap()),
                    b_role,
                    macs_per_group: 8,
                    im2col_unpack: cfg.act_bits < cw,
                    weight_unpack: cw / cfg.w_bits,
                    sign,
                    act_is_rs1,
                })
            }
        }
    }

    pub fn compute_bits(&self) -> u32 {
        self.simd_fmt.width_a().bits()
    }
}

/// The integer tensors and requantization parameters of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerData {
    /// (H, W, C)
    pub input: QuantizedTensor,
    /// (K, kH, kW, C)
    pub weights: QuantizedTensor,
    pub requant: Requant,
}

impl LayerData {
    /// Random tensors from `cfg.seed`, with requantization parameters fitted to
    /// the resulting accumulator range so every output code is exercised.
    pub fn synthesize(cfg: &LayerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        let input = QuantizedTensor::random(&mut rng, &[cfg.in_h, cfg.in_w, cfg.in_c], cfg.act_bits, cfg.act_signed)?;
        let weights = QuantizedTensor::random(
            &mut rng,
            &[cfg.out_c, cfg.k_h, cfg.k_w, cfg.in_c],
            cfg.w_bits,
            cfg.w_signed,
        )?;
        let phi = golden_conv(&input, &weights, cfg.pad, cfg.stride)?;
        let requant = fit_requant(cfg, &phi, &mut rng)?;
        Ok(LayerData { input, weights, requant })
    }

    /// Given tensors, with requantization parameters fitted as in [`Self::synthesize`].
    pub fn from_tensors(cfg: &LayerConfig, input: QuantizedTensor, weights: QuantizedTensor) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        let phi = golden_conv(&input, &weights, cfg.pad, cfg.stride)?;
        let requant = fit_requant(cfg, &phi, &mut rng)?;
        let data = LayerData { input, weights, requant };
        data.check(cfg)?;
        Ok(data)
    }

    pub fn check(&self, cfg: &LayerConfig) -> Result<()> {
        let want_x = [cfg.in_h, cfg.in_w, cfg.in_c];
        let want_w = [cfg.out_c, cfg.k_h, cfg.k_w, cfg.in_c];
        if self.input.shape != want_x || self.input.nbits != cfg.act_bits || self.input.signed != cfg.act_signed {
            return Err(KernelError::Config(format!(
                "input tensor is {:?} {}-bit, config wants {want_x:?} {}-bit",
                self.input.shape, self.input.nbits, cfg.act_bits
            )));
        }
        if self.weights.shape != want_w || self.weights.nbits != cfg.w_bits || self.weights.signed != cfg.w_signed {
            return Err(KernelError::Config(format!(
                "weight tensor is {:?} {}-bit, config wants {want_w:?} {}-bit",
                self.weights.shape, self.weights.nbits, cfg.w_bits
            )));
        }
        match (&self.requant, cfg.out_bits) {
            (Requant::Thresholds(t), 2 | 4) if t.out_bits == cfg.out_bits => Ok(()),
            (Requant::ScaleClamp(_), 8) => Ok(()),
            _ => Err(KernelError::Config(format!(
                "{}-bit outputs need {} parameters",
                cfg.out_bits,
                if cfg.out_bits == 8 { "scale-clamp" } else { "threshold" }
            ))),
        }
    }

    /// The reference output: requantized convolution.
    pub fn expected_output(&self, cfg: &LayerConfig) -> Result<QuantizedTensor> {
        let phi = golden_conv(&self.input, &self.weights, cfg.pad, cfg.stride)?;
        Ok(golden_quant(&phi, &self.requant, cfg.out_bits, cfg.out_signed)?)
    }
}

fn channel_ranges(phi: &AccTensor) -> Vec<(i32, i32)> {
    let k = phi.shape[2];
    let mut r = vec![(i32::MAX, i32::MIN); k];
    for (i, &v) in phi.data.iter().enumerate() {
        let e = &mut r[i % k];
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    r
}

fn fit_requant<R: rand::Rng>(cfg: &LayerConfig, phi: &AccTensor, rng: &mut R) -> Result<Requant> {
    let ranges = channel_ranges(phi);
    if cfg.out_bits == 8 {
        let (lo, hi) = crate::quant::code_range(8, cfg.out_signed);
        let span = ranges.iter().map(|&(a, b)| i64::from(b) - i64::from(a)).max().unwrap_or(0);
        let mut shift = 0u32;
        while (span >> shift) > 255 && shift < 30 {
            shift += 1;
        }
        let mid_code = (lo + hi) / 2;
        let bias = ranges
            .iter()
            .map(|&(a, b)| {
                let centre = ((i64::from(a) + i64::from(b)) / 2) as i32;
                let jitter = rng.gen_range(-8i32..=8) << shift;
                (mid_code << shift).wrapping_sub(centre).wrapping_add(jitter)
            })
            .collect();
        Ok(Requant::ScaleClamp(ScaleClampParams::new(bias, shift, lo, hi)?))
    } else {
        let levels = f64::from(1u32 << cfg.out_bits);
        let params = ranges
            .iter()
            .map(|&(a, b)| {
                let eps = ((f64::from(b) - f64::from(a) + 1.0) / levels).max(1.0);
                let alpha = f64::from(a) + rng.gen_range(-0.5..0.5) * eps;
                QuantParams::from_step(alpha, eps, cfg.out_bits, cfg.out_signed)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Requant::Thresholds(make_channel_thresholds(&params, cfg.out_bits)?))
    }
}
