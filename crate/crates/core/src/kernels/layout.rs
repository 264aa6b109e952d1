//! Data memory image of a layer: where each buffer lives and how tensors are
//! rearranged offline so the generated loops read them sequentially.
//!
//! The patch built by im2col is a stream of K positions: for each kernel tap
//! `(dy, dx)` the input pixel's channels, padded to whole activation words.
//! Operand words line up position by position; on the software path, unpacking
//! permutes lanes, and the weights are laid out with the same permutation.

use serde::{Deserialize, Serialize};

use super::{KernelPlan, LayerConfig, OperandRole};
use crate::exec::IsaMode;
use crate::machine::Memory;
use crate::quant::{pack, unpack, QuantizedTensor, Requant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLayout {
    pub x_base: u32,
    pub w_base: u32,
    pub q_base: u32,
    pub buf0: u32,
    pub buf1: u32,
    pub out_base: u32,
    pub mem_size: usize,
    /// Packed words per input pixel.
    pub act_pixel_words: usize,
    /// Compute words produced per packed activation word (1 without unpacking).
    pub act_unpack: usize,
    /// Words im2col writes per patch before trailing zero padding.
    pub patch_words: usize,
    /// Words per patch buffer, a whole number of MatMul iterations.
    pub buf_words: usize,
    pub loop_count: usize,
    pub weight_words: usize,
    pub q_words_per_channel: usize,
    pub out_pixel_bytes: usize,
    /// Bytes of output written per block of up to 4 channels.
    pub group_bytes: usize,
}

fn align(v: usize, a: usize) -> usize {
    v.div_ceil(a) * a
}

impl MemoryLayout {
    pub fn new(cfg: &LayerConfig, plan: &KernelPlan) -> Self {
        let wpp = (cfg.in_c * cfg.act_bits as usize).div_ceil(32);
        let taps = cfg.k_h * cfg.k_w;
        let (act_unpack, patch_words, buf_words, loop_count, weight_words) = match plan.mode {
            IsaMode::Mpic => {
                let g = plan.simd_fmt.group_count() as usize;
                let real = taps * wpp;
                match plan.b_role {
                    OperandRole::Weights => {
                        let m = align(real, g);
                        (1, real, m, m / g, m / g)
                    }
                    OperandRole::Activations => (1, real, real, real, real * g),
                }
            }
            IsaMode::Ri5cy => {
                let ra = (plan.compute_bits() / cfg.act_bits) as usize;
                let rw = plan.weight_unpack as usize;
                let real = taps * wpp * ra;
                let m = align(real, rw);
                (ra, real, m, m / rw, m / rw)
            }
        };
        let q_words_per_channel = if cfg.out_bits == 8 { 1 } else { (1 << cfg.out_bits) - 1 };
        let out_pixel_bytes = 4 * (cfg.out_c * cfg.out_bits as usize).div_ceil(32);
        let pixels = cfg.out_h() * cfg.out_w();

        let x_base = 0x1000usize;
        let w_base = align(x_base + 4 * cfg.in_h * cfg.in_w * wpp, 64);
        let q_base = align(w_base + 4 * cfg.out_c * weight_words, 64);
        let buf0 = align(q_base + 4 * cfg.out_c * q_words_per_channel, 64);
        let buf1 = buf0 + 4 * buf_words;
        let out_base = align(buf1 + 4 * buf_words, 64);
        let end = out_base + pixels * out_pixel_bytes;
        MemoryLayout {
            x_base: x_base as u32,
            w_base: w_base as u32,
            q_base: q_base as u32,
            buf0: buf0 as u32,
            buf1: buf1 as u32,
            out_base: out_base as u32,
            mem_size: align(end + 0x1000, 0x1000),
            act_pixel_words: wpp,
            act_unpack,
            patch_words,
            buf_words,
            loop_count,
            weight_words,
            q_words_per_channel,
            out_pixel_bytes,
            group_bytes: cfg.out_bits as usize / 2,
        }
    }

    pub fn buf_bytes(&self) -> usize {
        4 * self.buf_words
    }

    /// Patch-stream position held by lane `i` of compute word `m`.
    pub fn act_position(&self, cfg: &LayerConfig, m: usize, i: usize) -> usize {
        let packed_lanes = 32 / cfg.act_bits as usize;
        if self.act_unpack == 1 {
            return m * packed_lanes + i;
        }
        let r = self.act_unpack;
        (m / r) * packed_lanes + r * i + m % r
    }

    /// Input tensor with every pixel padded to whole words.
    pub fn input_image(&self, cfg: &LayerConfig, x: &QuantizedTensor) -> Vec<u32> {
        let vals = x.values();
        let mut out = Vec::with_capacity(cfg.in_h * cfg.in_w * self.act_pixel_words);
        for px in vals.chunks(cfg.in_c) {
            let mut words = pack(px, cfg.act_bits).expect("tensor lanes fit their width");
            words.resize(self.act_pixel_words, 0);
            out.extend(words);
        }
        out
    }

    /// Weight words of one filter in the order the MatMul loop loads them.
    fn filter_words(&self, cfg: &LayerConfig, plan: &KernelPlan, w: &[i32], f: usize) -> Vec<u32> {
        let cp = self.act_pixel_words * 32 / cfg.act_bits as usize;
        let taps = cfg.k_h * cfg.k_w;
        let weight_at = |pos: usize| -> i32 {
            let (tap, c) = (pos / cp, pos % cp);
            if tap < taps && c < cfg.in_c {
                w[(f * taps + tap) * cfg.in_c + c]
            } else {
                0
            }
        };
        let wb = cfg.w_bits as usize;
        match plan.mode {
            IsaMode::Mpic => {
                let lanes = 32 / wb;
                let stream: Vec<i32> = (0..self.weight_words * lanes).map(weight_at).collect();
                pack(&stream, cfg.w_bits).expect("weights fit their width")
            }
            IsaMode::Ri5cy => {
                let cw = plan.compute_bits() as usize;
                let lc = 32 / cw;
                let rw = plan.weight_unpack as usize;
                (0..self.weight_words)
                    .map(|q| {
                        let mut lanes = vec![0i32; 32 / wb];
                        for j in 0..rw {
                            for i in 0..lc {
                                lanes[rw * i + j] = weight_at(self.act_position(cfg, rw * q + j, i));
                            }
                        }
                        pack(&lanes, cfg.w_bits).expect("weights fit their width")[0]
                    })
                    .collect()
            }
        }
    }

    /// All filters, interleaved within each block of 4 so that word `j` of
    /// every filter in the block is adjacent.
    pub fn weight_image(&self, cfg: &LayerConfig, plan: &KernelPlan, w: &QuantizedTensor) -> Vec<u32> {
        let vals = w.values();
        let per_filter: Vec<Vec<u32>> = (0..cfg.out_c).map(|f| self.filter_words(cfg, plan, &vals, f)).collect();
        let mut out = Vec::with_capacity(cfg.out_c * self.weight_words);
        for block in per_filter.chunks(4) {
            for j in 0..self.weight_words {
                out.extend(block.iter().map(|fw| fw[j]));
            }
        }
        out
    }

    /// Per-channel requantization words: thresholds in heap order, or the bias.
    pub fn qparam_image(&self, cfg: &LayerConfig, requant: &Requant) -> Vec<u32> {
        let mut out = Vec::with_capacity(cfg.out_c * self.q_words_per_channel);
        for k in 0..cfg.out_c {
            match requant {
                Requant::Thresholds(t) => {
                    let row = t.channel(k);
                    out.extend(heap_order(row.len()).into_iter().map(|i| row[i] as u32));
                }
                Requant::ScaleClamp(s) => out.push(s.bias_for(k) as u32),
            }
        }
        out
    }

    pub fn read_output(&self, cfg: &LayerConfig, mem: &Memory) -> QuantizedTensor {
        let (oh, ow) = (cfg.out_h(), cfg.out_w());
        let words_pp = self.out_pixel_bytes / 4;
        let words = mem
            .read_words(self.out_base, oh * ow * words_pp)
            .expect("output region lies inside the layout");
        let mut vals = Vec::with_capacity(oh * ow * cfg.out_c);
        for px in words.chunks(words_pp) {
            vals.extend_from_slice(&unpack(px, cfg.out_bits, cfg.out_signed)[..cfg.out_c]);
        }
        QuantizedTensor::from_values(&[oh, ow, cfg.out_c], &vals, cfg.out_bits, cfg.out_signed)
            .expect("unpacked codes fit their width")
    }
}

/// Sorted index stored at each slot of a breadth-first binary search tree
/// over `n = 2^d - 1` sorted keys.
pub(crate) fn heap_order(n: usize) -> Vec<usize> {
    fn fill(out: &mut [usize], slot: usize, lo: usize, hi: usize) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        out[slot] = mid;
        fill(out, 2 * slot + 1, lo, mid);
        fill(out, 2 * slot + 2, mid + 1, hi);
    }
    let mut out = vec![0; n];
    fill(&mut out, 0, 0, n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_order_of_small_trees() {
        assert_eq!(heap_order(3), vec![1, 0, 2]);
        assert_eq!(heap_order(7), vec![3, 1, 5, 0, 2, 4, 6]);
        let mut h = heap_order(15);
        h.sort();
        assert_eq!(h, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn buffer_sizes() {
        let cfg = LayerConfig::desk(2, 2);
        let mpic = KernelPlan::new(&cfg, IsaMode::Mpic).unwrap();
        let l = MemoryLayout::new(&cfg, &mpic);
        // 16 two-bit channels fill one word; nine taps
        assert_eq!(l.patch_words, 9);
        assert_eq!(l.buf_bytes(), 36);
        assert_eq!(l.loop_count, 9);
        let ri = KernelPlan::new(&cfg, IsaMode::Ri5cy).unwrap();
        let l = MemoryLayout::new(&cfg, &ri);
        assert_eq!(l.patch_words, 36);
        assert_eq!(l.loop_count, 9);

        let cfg = LayerConfig::desk(2, 8);
        let l = MemoryLayout::new(&cfg, &KernelPlan::new(&cfg, IsaMode::Mpic).unwrap());
        // two-bit activations are operand B: one B word per iteration, four A words
        assert_eq!((l.patch_words, l.loop_count, l.weight_words), (9, 9, 36));
        let cfg = LayerConfig::desk(8, 4);
        let l = MemoryLayout::new(&cfg, &KernelPlan::new(&cfg, IsaMode::Mpic).unwrap());
        // 36 activation words, two per weight word
        assert_eq!((l.patch_words, l.buf_words, l.loop_count), (36, 36, 18));
    }

    #[test]
    fn unpack_permutation() {
        let cfg = LayerConfig::desk(4, 4);
        let plan = KernelPlan::new(&cfg, IsaMode::Ri5cy).unwrap();
        let l = MemoryLayout::new(&cfg, &plan);
        // compute word 0 holds the even nibbles of packed word 0, word 1 the odd ones
        let w0: Vec<_> = (0..4).map(|i| l.act_position(&cfg, 0, i)).collect();
        let w1: Vec<_> = (0..4).map(|i| l.act_position(&cfg, 1, i)).collect();
        let w2: Vec<_> = (0..4).map(|i| l.act_position(&cfg, 2, i)).collect();
        assert_eq!(w0, vec![0, 2, 4, 6]);
        assert_eq!(w1, vec![1, 3, 5, 7]);
        assert_eq!(w2, vec![8, 10, 12, 14]);
    }
}
